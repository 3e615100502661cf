#include "ufl/evaluation.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "ufl/error.hpp"

namespace ufl {

namespace {

// Number of pairs i < j within runs of equal keys, for a sequence sorted by that key.
template <typename Eq>
long long tied_pairs(std::size_t n, Eq equal) {
  long long total = 0;
  std::size_t run = 1;
  for (std::size_t i = 1; i <= n; ++i) {
    if (i < n && equal(i - 1, i)) {
      ++run;
      continue;
    }
    total += static_cast<long long>(run) * static_cast<long long>(run - 1) / 2;
    run = 1;
  }
  return total;
}

// Sorts v ascending, returning the number of strict inversions (pairs i<j with v_i > v_j).
long long count_inversions(std::vector<double>& v, std::vector<double>& buf, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  long long swaps = count_inversions(v, buf, lo, mid) + count_inversions(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += static_cast<long long>(mid - i);
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

}  // namespace

double kendall_tau(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionMismatchError("kendall_tau needs equal-length score vectors");
  const std::size_t n = a.size();
  if (n < 2) throw std::invalid_argument("kendall_tau needs at least two scores");

  // Knight's algorithm: sort by (a, b), then count b-inversions with a merge sort.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return a[i] < a[j] || (a[i] == a[j] && b[i] < b[j]);
  });
  std::vector<double> bs(n);
  for (std::size_t i = 0; i < n; ++i) bs[i] = b[order[i]];

  const long long tied_a = tied_pairs(n, [&](std::size_t i, std::size_t j) { return a[order[i]] == a[order[j]]; });
  const long long tied_ab = tied_pairs(
      n, [&](std::size_t i, std::size_t j) { return a[order[i]] == a[order[j]] && bs[i] == bs[j]; });
  std::vector<double> buf(n);
  const long long swaps = count_inversions(bs, buf, 0, n);
  const long long tied_b = tied_pairs(n, [&](std::size_t i, std::size_t j) { return bs[i] == bs[j]; });

  const long long pairs = static_cast<long long>(n) * static_cast<long long>(n - 1) / 2;
  const long long net = pairs - tied_a - tied_b + tied_ab - 2 * swaps;
  return static_cast<double>(net) / static_cast<double>(pairs);
}

EvaluationSet make_evaluation_set(const ProblemDef& p, std::size_t n_eval, std::uint64_t seed) {
  if (n_eval < 2) throw std::invalid_argument("evaluation needs at least two samples");
  Rng rng(seed);
  EvaluationSet set;
  set.outputs.reserve(n_eval);
  set.expert_scores.reserve(n_eval);
  while (set.outputs.size() < n_eval) {
    Example e = sample_feasible_example(p, rng, std::nullopt);
    if (!e.feasible) continue;
    set.expert_scores.push_back(expert_score(p.name, e.y));
    set.outputs.push_back(std::move(e.y));
  }
  return set;
}

double ranking_similarity(const EvaluationSet& set, const UtilityEvaluator& surrogate) {
  std::vector<double> scores;
  scores.reserve(set.outputs.size());
  for (const auto& y : set.outputs) scores.push_back(surrogate(y));
  return kendall_tau(set.expert_scores, scores);
}

double ranking_similarity(const ProblemDef& p, const ExpertFn& expert, const UtilityEvaluator& surrogate,
                          std::size_t n_eval, std::uint64_t seed) {
  if (expert.problem != p.name) throw std::invalid_argument("expert belongs to a different problem");
  return ranking_similarity(make_evaluation_set(p, n_eval, seed), surrogate);
}

}  // namespace ufl
