#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mixkit/audio.hpp"
#include "mixkit/error.hpp"
#include "mixkit/parallel.hpp"
#include "mixkit/stft.hpp"

namespace mixkit {

enum class MaskKind { irm, ibm, psf, estimated };

inline std::string to_string(MaskKind k) {
  switch (k) {
    case MaskKind::irm: return "irm";
    case MaskKind::ibm: return "ibm";
    case MaskKind::psf: return "psf";
    case MaskKind::estimated: return "estimated";
  }
  return "?";
}

/// C real F x T masks of one kind.
struct MaskSet {
  std::vector<RealMatrix> masks;
  MaskKind kind = MaskKind::estimated;
};

/// Oracle mask for `target` against the complex sum of `others`.
///
///   irm = |s| / (|s| + |n|)
///   ibm = 1 if |s| > |n| else 0
///   psf = cos(angle(s) - angle(x)) |s| / |x|,  x = s + n  (not truncated)
///
/// Bins where the denominator is zero get 0.
inline RealMatrix oracle_mask(const ComplexMatrix& target, std::span<const ComplexMatrix> others, MaskKind kind) {
  ComplexMatrix noise = ComplexMatrix::Zero(target.rows(), target.cols());
  for (const auto& o : others) {
    if (o.rows() != target.rows() || o.cols() != target.cols()) {
      throw InvalidArgument("oracle_mask: interference shape does not match target");
    }
    noise += o;
  }
  RealMatrix m(target.rows(), target.cols());
  for (Eigen::Index j = 0; j < target.cols(); ++j) {
    for (Eigen::Index i = 0; i < target.rows(); ++i) {
      const auto s = target(i, j);
      const auto n = noise(i, j);
      const double as = std::abs(s), an = std::abs(n);
      switch (kind) {
        case MaskKind::irm:
          m(i, j) = (as + an) > 0.0 ? as / (as + an) : 0.0;
          break;
        case MaskKind::ibm:
          m(i, j) = as > an ? 1.0 : 0.0;
          break;
        case MaskKind::psf: {
          const auto x = s + n;
          const double ax2 = std::norm(x);
          m(i, j) = ax2 > 0.0 ? (s * std::conj(x)).real() / ax2 : 0.0;
          break;
        }
        case MaskKind::estimated:
          throw InvalidArgument("oracle_mask: 'estimated' is not an oracle kind");
      }
    }
  }
  return m;
}

inline RealMatrix oracle_mask(const Spectrogram& target, std::span<const Spectrogram> others, MaskKind kind) {
  std::vector<ComplexMatrix> o;
  for (const auto& s : others) o.push_back(s.bins);
  return oracle_mask(target.bins, std::span<const ComplexMatrix>(o), kind);
}

constexpr double kSiSdrCap = 100.0;

inline bool is_capped(double si_sdr_db) { return std::abs(si_sdr_db) >= kSiSdrCap; }

/// Scale-invariant SDR in dB, clamped to [-100, 100].
inline double si_sdr(std::span<const double> estimate, std::span<const double> reference) {
  if (estimate.size() != reference.size()) throw InvalidArgument("si_sdr: length mismatch");
  double er = 0.0, rr = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    er += estimate[i] * reference[i];
    rr += reference[i] * reference[i];
  }
  if (!(rr > 0.0)) throw InvalidArgument("si_sdr: reference has zero energy");
  const double alpha = er / rr;
  double target = 0.0, residual = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double t = alpha * reference[i];
    const double e = estimate[i] - t;
    target += t * t;
    residual += e * e;
  }
  if (residual == 0.0) return target > 0.0 ? kSiSdrCap : -kSiSdrCap;
  if (target == 0.0) return -kSiSdrCap;
  return std::clamp(10.0 * std::log10(target / residual), -kSiSdrCap, kSiSdrCap);
}

inline double si_sdr(const AudioBuffer& estimate, const AudioBuffer& reference) {
  return si_sdr(estimate.channel(0), reference.channel(0));
}

/// Best assignment of estimates to references.
/// `permutation[c]` is the estimate index scored against reference c and
/// `per_source[c]` its SI-SDR.
struct PermutedScore {
  std::vector<double> per_source;
  std::vector<int> permutation;

  double mean() const { return pairwise_mean(per_source); }
};

/// Exhaustive search over all C! assignments maximizing mean SI-SDR (C <= 4).
inline PermutedScore si_sdr_permuted(std::span<const std::vector<double>> estimates,
                                     std::span<const std::vector<double>> references) {
  const std::size_t c = references.size();
  if (c == 0 || estimates.size() != c) throw InvalidArgument("si_sdr_permuted: need matching, non-empty source lists");
  if (c > 4) throw InvalidArgument("si_sdr_permuted: at most 4 sources");
  std::vector<std::vector<double>> score(c, std::vector<double>(c));
  for (std::size_t r = 0; r < c; ++r) {
    for (std::size_t e = 0; e < c; ++e) score[r][e] = si_sdr(estimates[e], references[r]);
  }
  std::vector<int> perm(c);
  std::iota(perm.begin(), perm.end(), 0);
  PermutedScore best;
  double best_sum = -std::numeric_limits<double>::infinity();
  do {
    double sum = 0.0;
    for (std::size_t r = 0; r < c; ++r) sum += score[r][static_cast<std::size_t>(perm[r])];
    if (sum > best_sum) {
      best_sum = sum;
      best.permutation = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  for (std::size_t r = 0; r < c; ++r) best.per_source.push_back(score[r][static_cast<std::size_t>(best.permutation[r])]);
  return best;
}

/// Mixture-phase resynthesis of `mask` applied to `mixture`.
inline std::vector<double> resynthesize(const Spectrogram& mixture, const RealMatrix& mask) {
  const auto y = istft(apply_mask(mixture, mask));
  return {y.channel(0).begin(), y.channel(0).end()};
}

// ---------------------------------------------------------------------------
// Benchmark over the four tasks.

enum class Task { enhance_single, enhance_both, separate_clean, separate_noisy };

inline std::string to_string(Task t) {
  switch (t) {
    case Task::enhance_single: return "enhance_single";
    case Task::enhance_both: return "enhance_both";
    case Task::separate_clean: return "separate_clean";
    case Task::separate_noisy: return "separate_noisy";
  }
  return "?";
}

inline Task parse_task(const std::string& s) {
  for (auto t : {Task::enhance_single, Task::enhance_both, Task::separate_clean, Task::separate_noisy}) {
    if (s == to_string(t)) return t;
    auto dashed = to_string(t);
    std::replace(dashed.begin(), dashed.end(), '_', '-');
    if (s == dashed) return t;
  }
  throw InvalidArgument("unknown task: " + s);
}

/// Time-aligned mono stems of one rendered mixture at a common rate.
struct UtteranceStems {
  std::string id;
  std::vector<double> s1;
  std::vector<double> s2;
  std::vector<double> noise;
  int sample_rate_hz = 8000;
};

struct EvalRow {
  std::string id;
  double si_sdr_db = 0.0;
  double si_sdr_noisy_db = 0.0;
  double improvement_db = 0.0;
  std::vector<int> permutation;
  bool capped = false;
};

struct EvalResult {
  std::vector<EvalRow> per_utterance;

  double mean_si_sdr() const { return mean_of(&EvalRow::si_sdr_db); }
  double mean_noisy() const { return mean_of(&EvalRow::si_sdr_noisy_db); }
  double mean_improvement() const { return mean_of(&EvalRow::improvement_db); }
  std::size_t capped_count() const {
    return static_cast<std::size_t>(std::count_if(per_utterance.begin(), per_utterance.end(),
                                                  [](const EvalRow& r) { return r.capped; }));
  }

 private:
  double mean_of(double EvalRow::*field) const {
    std::vector<double> v;
    for (const auto& r : per_utterance) v.push_back(r.*field);
    return pairwise_mean(v);
  }
};

/// Mixture and (target, interference) sources for one task.
struct TaskSignals {
  std::vector<double> mixture;
  std::vector<std::vector<double>> targets;
  std::vector<std::vector<double>> interferences;  // interferences[c] pairs with targets[c]
};

inline TaskSignals task_signals(const UtteranceStems& u, Task task) {
  const std::size_t n = u.s1.size();
  if (u.s2.size() != n || u.noise.size() != n) throw InvalidArgument("task_signals: stems differ in length");
  auto sum = [n](std::initializer_list<const std::vector<double>*> parts) {
    std::vector<double> out(n, 0.0);
    for (const auto* p : parts) {
      for (std::size_t i = 0; i < n; ++i) out[i] += (*p)[i];
    }
    return out;
  };
  TaskSignals t;
  switch (task) {
    case Task::enhance_single:  // s1 + noise premix; s2 is silent
      t.mixture = sum({&u.s1, &u.noise});
      t.targets = {u.s1};
      t.interferences = {u.noise};
      break;
    case Task::enhance_both:
      t.mixture = sum({&u.s1, &u.s2, &u.noise});
      t.targets = {sum({&u.s1, &u.s2})};
      t.interferences = {u.noise};
      break;
    case Task::separate_clean:
      t.mixture = sum({&u.s1, &u.s2});
      t.targets = {u.s1, u.s2};
      t.interferences = {u.s2, u.s1};
      break;
    case Task::separate_noisy:
      t.mixture = sum({&u.s1, &u.s2, &u.noise});
      t.targets = {u.s1, u.s2};
      t.interferences = {sum({&u.s2, &u.noise}), sum({&u.s1, &u.noise})};
      break;
  }
  return t;
}

/// Scores estimates against a task's targets. Multi-target tasks are
/// permutation-resolved; the noisy baseline scores the mixture itself.
inline EvalRow score_utterance(const std::string& id, std::span<const std::vector<double>> estimates,
                               const TaskSignals& signals) {
  EvalRow row;
  row.id = id;
  const auto best = si_sdr_permuted(estimates, signals.targets);
  row.si_sdr_db = best.mean();
  row.permutation = best.permutation;
  std::vector<double> noisy;
  for (const auto& t : signals.targets) noisy.push_back(si_sdr(signals.mixture, t));
  row.si_sdr_noisy_db = pairwise_mean(noisy);
  row.improvement_db = row.si_sdr_db - row.si_sdr_noisy_db;
  row.capped = std::any_of(best.per_source.begin(), best.per_source.end(), is_capped) ||
               std::any_of(noisy.begin(), noisy.end(), is_capped);
  return row;
}

/// One task of the oracle table: the unprocessed baseline plus one result per mask kind.
struct OracleTaskResult {
  Task task = Task::separate_clean;
  EvalResult noisy;  // mixture used as the estimate
  std::vector<std::pair<MaskKind, EvalResult>> by_kind;
};

inline OracleTaskResult run_oracle_benchmark(std::span<const UtteranceStems> utterances, Task task,
                                             std::span<const MaskKind> kinds, unsigned threads = 1) {
  OracleTaskResult out;
  out.task = task;
  out.noisy.per_utterance.resize(utterances.size());
  for (auto k : kinds) {
    out.by_kind.emplace_back(k, EvalResult{});
    out.by_kind.back().second.per_utterance.resize(utterances.size());
  }

  parallel_for(utterances.size(), threads, [&](std::size_t i) {
    const auto& u = utterances[i];
    const auto sig = task_signals(u, task);
    const auto config = StftConfig::for_rate(u.sample_rate_hz);
    const auto mix = stft(AudioBuffer::mono(sig.mixture, u.sample_rate_hz), config);

    std::vector<ComplexMatrix> target_spec, interf_spec;
    for (const auto& t : sig.targets) target_spec.push_back(stft(AudioBuffer::mono(t, u.sample_rate_hz), config).bins);
    for (const auto& n : sig.interferences) interf_spec.push_back(stft(AudioBuffer::mono(n, u.sample_rate_hz), config).bins);

    std::vector<std::vector<double>> as_is(sig.targets.size(), sig.mixture);
    out.noisy.per_utterance[i] = score_utterance(u.id, as_is, sig);

    for (std::size_t k = 0; k < kinds.size(); ++k) {
      std::vector<std::vector<double>> estimates;
      for (std::size_t c = 0; c < sig.targets.size(); ++c) {
        const auto mask = oracle_mask(target_spec[c], std::span<const ComplexMatrix>(&interf_spec[c], 1), kinds[k]);
        estimates.push_back(resynthesize(mix, mask));
      }
      out.by_kind[k].second.per_utterance[i] = score_utterance(u.id, estimates, sig);
    }
  });
  return out;
}

inline std::string format_permutation(const std::vector<int>& perm) {
  std::string s;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    if (i) s += ' ';
    s += std::to_string(perm[i] + 1);
  }
  return s;
}

/// CSV: id,input_si_sdr_db,output_si_sdr_db,improvement_db,permutation
/// Permutations are 1-based estimate indices separated by spaces.
inline void export_per_utterance_csv(const EvalResult& result, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("export_per_utterance_csv: cannot open " + path.string());
  out << "id,input_si_sdr_db,output_si_sdr_db,improvement_db,permutation\n";
  char buf[160];
  for (const auto& r : result.per_utterance) {
    std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%.6f,", r.si_sdr_noisy_db, r.si_sdr_db, r.improvement_db);
    out << r.id << buf << format_permutation(r.permutation) << '\n';
  }
  if (!out) throw IoError("export_per_utterance_csv: write failed for " + path.string());
}

}  // namespace mixkit
