#pragma once

#include <string_view>
#include <vector>

#include "mmforge/types.hpp"

namespace mmforge::segmenter {

// Splits after each run of terminal punctuation (。．！？!?) and at
// newlines. Segments are whitespace-trimmed; empty segments are dropped.
std::vector<Sentence> segment(std::string_view text);

// True when no scalar is Japanese, a Latin letter or a digit.
bool is_symbol_only(std::string_view text);

// Appends each symbol-only sentence to its predecessor. Symbol-only
// sentences at the head of the list are prepended to the first
// sentence that has content. Indices are renumbered.
std::vector<Sentence> merge_symbol_only(const std::vector<Sentence>& sentences);

bool is_closing_bracket(char32_t c);

// Moves a leading run of closing brackets onto the end of the previous
// sentence, deleting sentences emptied by the move.
std::vector<Sentence> fix_closing_brackets(const std::vector<Sentence>& sentences);

// segment -> merge_symbol_only -> fix_closing_brackets, then trims each
// sentence and drops empties.
std::vector<Sentence> split_sentences(std::string_view text);

}  // namespace mmforge::segmenter
