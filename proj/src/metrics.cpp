#include "omni/metrics.hpp"

#include <algorithm>
#include <sstream>

#include "omni/errors.hpp"

namespace omni {

namespace {

template <typename Seq>
int64_t levenshtein(const Seq& a, const Seq& b) {
  const size_t n = a.size(), m = b.size();
  std::vector<int64_t> prev(m + 1), cur(m + 1);
  for (size_t j = 0; j <= m; ++j) prev[j] = static_cast<int64_t>(j);
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int64_t>(i);
    for (size_t j = 1; j <= m; ++j) {
      const int64_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

template <typename ToTokens>
ErrorRate rate_over(const std::vector<std::string>& refs, const std::vector<std::string>& hyps,
                    ToTokens to_tokens) {
  if (refs.size() != hyps.size())
    throw DataError("error rate: " + std::to_string(refs.size()) + " references vs " +
                    std::to_string(hyps.size()) + " hypotheses");
  ErrorRate r;
  double rate_sum = 0.0;
  for (size_t i = 0; i < refs.size(); ++i) {
    const auto ref = to_tokens(refs[i]);
    if (ref.empty()) {
      ++r.n_skipped_empty_ref;
      continue;
    }
    const int64_t edits = levenshtein(ref, to_tokens(hyps[i]));
    r.total_edits += edits;
    r.total_ref_len += static_cast<int64_t>(ref.size());
    rate_sum += static_cast<double>(edits) / static_cast<double>(ref.size());
    ++r.n_scored;
  }
  if (r.n_scored > 0) {
    r.aggregate = static_cast<double>(r.total_edits) / static_cast<double>(r.total_ref_len);
    r.mean_per_utt = rate_sum / static_cast<double>(r.n_scored);
  }
  return r;
}

}  // namespace

int64_t edit_distance(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  return levenshtein(a, b);
}

int64_t edit_distance(const std::string& a, const std::string& b) { return levenshtein(a, b); }

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

ErrorRate character_error_rate(const std::vector<std::string>& refs,
                               const std::vector<std::string>& hyps) {
  return rate_over(refs, hyps, [](const std::string& s) { return s; });
}

ErrorRate word_error_rate(const std::vector<std::string>& refs,
                          const std::vector<std::string>& hyps) {
  return rate_over(refs, hyps, split_words);
}

}  // namespace omni
