#pragma once

#include <string>
#include <vector>

namespace omni {

// Levenshtein distance (unit insert/delete/substitute).
int64_t edit_distance(const std::vector<std::string>& a, const std::vector<std::string>& b);
int64_t edit_distance(const std::string& a, const std::string& b);  // character tokens

std::vector<std::string> split_words(const std::string& text);

struct ErrorRate {
  double aggregate = 0.0;     // total edits / total reference length
  double mean_per_utt = 0.0;  // mean of per-utterance rates
  int64_t total_edits = 0;
  int64_t total_ref_len = 0;
  int64_t n_scored = 0;
  int64_t n_skipped_empty_ref = 0;  // flagged and excluded from both averages
};

ErrorRate character_error_rate(const std::vector<std::string>& refs,
                               const std::vector<std::string>& hyps);
ErrorRate word_error_rate(const std::vector<std::string>& refs,
                          const std::vector<std::string>& hyps);

}  // namespace omni
