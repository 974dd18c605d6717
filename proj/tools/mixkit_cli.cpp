// mixkit: command-line front end for corpus curation, mixture planning and
// rendering, verification, oracle evaluation and loss checking.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "mixkit/corpus.hpp"
#include "mixkit/grad_check.hpp"
#include "mixkit/manifest.hpp"
#include "mixkit/mixing.hpp"
#include "mixkit/objectives.hpp"
#include "mixkit/parallel.hpp"
#include "mixkit/sepeval.hpp"
#include "mixkit/stft.hpp"
#include "mixkit/synth.hpp"
#include "mixkit/tensor_io.hpp"
#include "mixkit/version.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitConstraint = 2;

void log(const std::string& msg) { std::cerr << "[mixkit] " << msg << "\n"; }

// Thrown for verification failures that are not exceptions of the library.
struct VerificationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Effective settings. Precedence: flags > --config JSON > defaults.
struct RunConfig {
  std::string command;
  std::optional<std::uint64_t> seed;
  std::string mode = "max";
  int sample_rate_hz = 8000;
  unsigned threads = 0;  // 0 = one per hardware thread
  std::string out;
  std::string root;
  std::string split = "train";
  mixkit::CurationOptions curation;

  json to_json() const {
    json j;
    j["command"] = command;
    j["tool_version"] = mixkit::kToolVersion;
    if (seed) j["seed"] = *seed;
    j["mode"] = mode;
    j["sample_rate_hz"] = sample_rate_hz;
    j["split"] = split;
    j["curation"] = {{"min_locations_per_bin", curation.constraints.min_locations},
                     {"min_hours_per_bin", curation.constraints.min_hours},
                     {"spl_calibration_db", curation.spl_calibration_db},
                     {"leak_threshold_db", curation.leak_threshold_db},
                     {"split_targets_hours",
                      {{"train", curation.targets.train_hours},
                       {"valid", curation.targets.valid_hours},
                       {"test", curation.targets.test_hours}}}};
    return j;  // threads and paths are left out: outputs do not depend on them
  }
};

struct Flags {
  std::string config_file;
  std::uint64_t seed = 0;
  std::string mode;
  int rate = 0;
  unsigned threads = 0;
  std::string out;
  std::string root;
  std::string split;
};

void apply_config_file(RunConfig& rc, const std::string& file) {
  if (file.empty()) return;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(mixkit::read_text(file));
  } catch (const nlohmann::json::exception& e) {
    throw mixkit::IoError("config " + file + ": " + e.what());
  }
  try {
    if (j.contains("seed")) rc.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("mode")) rc.mode = j["mode"].get<std::string>();
    if (j.contains("sample_rate_hz")) rc.sample_rate_hz = j["sample_rate_hz"].get<int>();
    if (j.contains("threads")) rc.threads = j["threads"].get<unsigned>();
    if (j.contains("out")) rc.out = j["out"].get<std::string>();
    if (j.contains("root")) rc.root = j["root"].get<std::string>();
    if (j.contains("split")) rc.split = j["split"].get<std::string>();
    if (j.contains("curation")) {
      const auto& c = j["curation"];
      auto& o = rc.curation;
      o.constraints.min_locations = c.value("min_locations_per_bin", o.constraints.min_locations);
      o.constraints.min_hours = c.value("min_hours_per_bin", o.constraints.min_hours);
      o.spl_calibration_db = c.value("spl_calibration_db", o.spl_calibration_db);
      o.leak_threshold_db = c.value("leak_threshold_db", o.leak_threshold_db);
      if (c.contains("split_targets_hours")) {
        const auto& t = c["split_targets_hours"];
        o.targets.train_hours = t.value("train", o.targets.train_hours);
        o.targets.valid_hours = t.value("valid", o.targets.valid_hours);
        o.targets.test_hours = t.value("test", o.targets.test_hours);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw mixkit::InvalidArgument("config " + file + ": " + e.what());
  }
}

RunConfig resolve(const std::string& command, CLI::App& sub, const Flags& f) {
  RunConfig rc;
  rc.command = command;
  apply_config_file(rc, f.config_file);
  auto given = [&](const char* name) { return sub.get_option_no_throw(name) && sub.get_option(name)->count() > 0; };
  if (given("--seed")) rc.seed = f.seed;
  if (given("--mode")) rc.mode = f.mode;
  if (given("--rate")) rc.sample_rate_hz = f.rate;
  if (given("--threads")) rc.threads = f.threads;
  if (given("--out")) rc.out = f.out;
  if (given("--root")) rc.root = f.root;
  if (given("--split")) rc.split = f.split;
  return rc;
}

void echo_config(const RunConfig& rc, const fs::path& dir) {
  mixkit::write_text(dir / "effective_config.json", rc.to_json().dump(2) + "\n");
}

fs::path require_out(const RunConfig& rc) {
  if (rc.out.empty()) throw mixkit::InvalidArgument(rc.command + ": --out is required");
  fs::create_directories(rc.out);
  return rc.out;
}

/// Data root: flag/config, else the sidecar of a manifest, else `fallback`.
fs::path data_root(const RunConfig& rc, const fs::path& fallback) {
  if (!rc.root.empty()) return rc.root;
  return fallback;
}

fs::path manifest_root(const RunConfig& rc, const fs::path& manifest) {
  if (!rc.root.empty()) return rc.root;
  const auto sidecar = fs::path(manifest).replace_extension(".json");
  if (fs::exists(sidecar)) {
    const auto j = nlohmann::json::parse(mixkit::read_text(sidecar), nullptr, false);
    if (!j.is_discarded() && j.contains("root")) return j["root"].get<std::string>();
  }
  return fs::absolute(manifest).parent_path();
}

mixkit::UtteranceStems load_stems(const fs::path& rendered, const std::string& id) {
  const auto name = id + ".wav";
  const auto s1 = mixkit::read_wav(rendered / "s1" / name).first_channel();
  const auto s2 = mixkit::read_wav(rendered / "s2" / name).first_channel();
  const auto noise = mixkit::read_wav(rendered / "noise" / name).first_channel();
  if (s1.frames() != s2.frames() || s1.frames() != noise.frames()) {
    throw mixkit::InvalidArgument(id + ": rendered stems differ in length");
  }
  auto vec = [](const mixkit::AudioBuffer& b) { return std::vector<double>(b.channel(0).begin(), b.channel(0).end()); };
  return {id, vec(s1), vec(s2), vec(noise), s1.sample_rate()};
}

// ---- commands ----------------------------------------------------------------

int cmd_synth(const RunConfig& rc, const mixkit::synth::CorpusOptions& base) {
  const auto out = require_out(rc);
  auto o = base;
  if (rc.seed) o.seed = *rc.seed;
  const auto s = mixkit::synth::make_corpus(out, o);
  log("synth: " + std::to_string(s.recordings) + " noise recordings, " + std::to_string(s.utterances) +
      " utterances, " + std::to_string(s.leaky_chunks) + "/" + std::to_string(s.chunks) + " chunks with leaked speech");
  return kExitOk;
}

int cmd_curate(const RunConfig& rc, const std::string& metadata) {
  const auto out = require_out(rc);
  const auto root = data_root(rc, fs::absolute(metadata).parent_path());
  const auto result = mixkit::curate_corpus(metadata, root, rc.curation);
  mixkit::write_text(out / "index.json", mixkit::noise_index_json(result.index, result.details));
  mixkit::write_text(out / "stats.txt", result.stats_text);
  echo_config(rc, out);
  for (const auto& w : result.assignment.warnings) log("curate: warning: " + w);
  log("curate: " + std::to_string(result.index.clips.size()) + " clips in 4 bins, 3 splits; rejected " +
      std::to_string(result.leak.rejected.size()) + " leaky chunks");
  std::cout << result.stats_text;
  return kExitOk;
}

int cmd_plan(const RunConfig& rc, const std::string& index_path, const std::string& pairs_path) {
  if (!rc.seed) throw mixkit::InvalidArgument("plan: --seed is required");
  const auto out = require_out(rc);
  const auto mode = mixkit::parse_mode(rc.mode);
  mixkit::check_pipeline_rate(rc.sample_rate_hz);
  const auto root = fs::absolute(data_root(rc, fs::absolute(pairs_path).parent_path()));
  const auto index = mixkit::read_noise_index(index_path);
  const auto pairs = mixkit::read_pair_list(pairs_path);
  const mixkit::NoisePool pool(index, mixkit::parse_split(rc.split), rc.sample_rate_hz);
  mixkit::AudioStore store(root);
  const auto rows = mixkit::plan_dataset(pairs, pool, *rc.seed, mode, store);
  mixkit::write_manifest(rows, out / "manifest.csv");
  auto sidecar = json::parse(mixkit::manifest_sidecar_json(*rc.seed, mixkit::index_digest(index), mode, rc.sample_rate_hz, rows.size()));
  sidecar["root"] = root.lexically_normal().string();
  mixkit::write_text(out / "manifest.json", sidecar.dump(2) + "\n");
  echo_config(rc, out);
  log("plan: " + std::to_string(rows.size()) + " mixtures, mode " + rc.mode + ", " + std::to_string(rc.sample_rate_hz) + " Hz");
  return kExitOk;
}

int cmd_render(const RunConfig& rc, const std::string& manifest_path) {
  const auto out = require_out(rc);
  const auto rows = mixkit::read_manifest(manifest_path);
  mixkit::AudioStore store(manifest_root(rc, manifest_path));
  for (const char* d : {"mix", "s1", "s2", "noise"}) fs::create_directories(out / d);
  std::mutex mutex;
  std::vector<std::string> failures;
  std::atomic<std::size_t> clipped{0};
  const unsigned threads = mixkit::resolve_threads(rc.threads);
  log("render: " + std::to_string(rows.size()) + " rows on " + std::to_string(threads) + " threads");
  mixkit::parallel_for(rows.size(), threads, [&](std::size_t i) {
    const auto& spec = rows[i];
    try {
      const auto r = mixkit::render_mixture(spec, store);
      const auto name = spec.mixture_id + ".wav";
      mixkit::write_wav(r.mix, out / "mix" / name, mixkit::WavEncoding::float32);
      mixkit::write_wav(r.s1, out / "s1" / name, mixkit::WavEncoding::float32);
      mixkit::write_wav(r.s2, out / "s2" / name, mixkit::WavEncoding::float32);
      mixkit::write_wav(r.noise, out / "noise" / name, mixkit::WavEncoding::float32);
      std::size_t over = 0;
      for (double v : r.mix.channel(0)) over += std::abs(v) > 1.0;
      clipped += over;
    } catch (const std::exception& e) {
      std::lock_guard lock(mutex);
      failures.push_back(spec.mixture_id + ": " + e.what());
    }
  });
  echo_config(rc, out);
  if (clipped) log("render: note: " + std::to_string(clipped.load()) + " mixture samples exceed full scale (float32 keeps them)");
  std::sort(failures.begin(), failures.end());
  for (const auto& f : failures) log("render: FAIL " + f);
  if (!failures.empty()) throw VerificationFailure(std::to_string(failures.size()) + " rows failed to render");
  return kExitOk;
}

int cmd_verify(const RunConfig& rc, const std::string& manifest_path, const std::string& rendered, double tolerance) {
  const auto rows = mixkit::read_manifest(manifest_path);
  mixkit::AudioStore store(manifest_root(rc, manifest_path));
  std::vector<std::string> failures(rows.size());
  mixkit::parallel_for(rows.size(), rc.threads, [&](std::size_t i) {
    const auto& spec = rows[i];
    char buf[256];
    try {
      const auto u = load_stems(rendered, spec.mixture_id);
      const auto mix = mixkit::read_wav(fs::path(rendered) / "mix" / (spec.mixture_id + ".wav")).first_channel();
      if (mix.frames() != u.s1.size()) throw mixkit::InvalidArgument("mix length differs from stems");
      if (u.sample_rate_hz != spec.sample_rate_hz) throw mixkit::InvalidArgument("sample rate differs from manifest");
      const auto l1 = store.load(spec.s1_path, spec.sample_rate_hz)->frames();
      const auto l2 = store.load(spec.s2_path, spec.sample_rate_hz)->frames();
      const auto expect = spec.mode == mixkit::MixMode::min
                              ? std::min(l1, l2)
                              : std::max(l1, l2) + spec.to_samples(spec.pad_before_s) + spec.to_samples(spec.pad_after_s);
      if (mix.frames() != expect) throw mixkit::InvalidArgument("length " + std::to_string(mix.frames()) + ", expected " + std::to_string(expect));
      double worst = 0.0, peak = 0.0;
      for (std::size_t k = 0; k < u.s1.size(); ++k) {
        worst = std::max(worst, std::abs(mix.channel(0)[k] - (u.s1[k] + u.s2[k] + u.noise[k])));
        peak = std::max({peak, std::abs(u.s1[k]), std::abs(u.s2[k]), std::abs(u.noise[k])});
      }
      if (worst > 1e-6 * (peak + 1e-3)) {
        std::snprintf(buf, sizeof buf, "mix != s1 + s2 + noise (max deviation %.3g)", worst);
        throw mixkit::InvalidArgument(buf);
      }
      const int rate = spec.sample_rate_hz;
      const auto s1 = mixkit::AudioBuffer::mono(u.s1, rate), s2 = mixkit::AudioBuffer::mono(u.s2, rate);
      const auto noise = mixkit::AudioBuffer::mono(u.noise, rate);
      const double snr = mixkit::snr_lufs(s1, noise).value, rel = mixkit::snr_lufs(s1, s2).value;
      std::string problems;
      if (std::abs(snr - spec.noise_snr_db) > tolerance) {
        std::snprintf(buf, sizeof buf, "SNR %.3f dB vs manifest %.3f dB; ", snr, spec.noise_snr_db);
        problems += buf;
      }
      if (std::abs(rel - spec.rel_level_db) > tolerance) {
        std::snprintf(buf, sizeof buf, "level difference %.3f dB vs manifest %.3f dB; ", rel, spec.rel_level_db);
        problems += buf;
      }
      if (!problems.empty()) failures[i] = problems.substr(0, problems.size() - 2);
    } catch (const std::exception& e) {
      failures[i] = e.what();
    }
  });
  std::size_t bad = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (failures[i].empty()) continue;
    ++bad;
    std::cout << "FAIL " << rows[i].mixture_id << ": " << failures[i] << "\n";
  }
  std::cout << "verify: " << rows.size() - bad << "/" << rows.size() << " rows within " << tolerance << " dB\n";
  if (bad) throw VerificationFailure(std::to_string(bad) + " rows failed verification");
  return kExitOk;
}

std::vector<mixkit::UtteranceStems> load_all_stems(const std::vector<mixkit::MixtureSpec>& rows, const fs::path& rendered) {
  std::vector<mixkit::UtteranceStems> out;
  for (const auto& r : rows) out.push_back(load_stems(rendered, r.mixture_id));
  return out;
}

std::vector<mixkit::Task> parse_tasks(const std::string& s) {
  if (s == "all") {
    return {mixkit::Task::enhance_single, mixkit::Task::enhance_both, mixkit::Task::separate_clean, mixkit::Task::separate_noisy};
  }
  return {mixkit::parse_task(s)};
}

int cmd_oracle_eval(const RunConfig& rc, const std::string& manifest_path, const std::string& rendered,
                    const std::string& task_name) {
  const auto rows = mixkit::read_manifest(manifest_path);
  const auto stems = load_all_stems(rows, rendered);
  const std::vector<mixkit::MaskKind> kinds{mixkit::MaskKind::irm, mixkit::MaskKind::ibm, mixkit::MaskKind::psf};
  std::optional<fs::path> out;
  if (!rc.out.empty()) out = require_out(rc);
  std::printf("%-16s %9s %9s %9s %9s   (mean SI-SDR dB over %zu utterances)\n", "task", "Noisy", "IRM", "IBM", "PSF",
              rows.size());
  for (auto task : parse_tasks(task_name)) {
    const auto r = mixkit::run_oracle_benchmark(stems, task, kinds, rc.threads);
    std::printf("%-16s %9.2f", mixkit::to_string(task).c_str(), r.noisy.mean_si_sdr());
    for (const auto& [kind, res] : r.by_kind) std::printf(" %9.2f", res.mean_si_sdr());
    std::printf("\n");
    if (out) {
      for (const auto& [kind, res] : r.by_kind) {
        mixkit::export_per_utterance_csv(res, *out / (mixkit::to_string(task) + "_" + mixkit::to_string(kind) + ".csv"));
      }
    }
  }
  if (out) echo_config(rc, *out);
  return kExitOk;
}

int cmd_eval(const RunConfig& rc, const std::string& manifest_path, const std::string& rendered,
             const std::string& estimates, const std::string& task_name, const std::string& csv) {
  const auto task = mixkit::parse_task(task_name);
  const auto rows = mixkit::read_manifest(manifest_path);
  mixkit::EvalResult result;
  result.per_utterance.resize(rows.size());
  mixkit::parallel_for(rows.size(), rc.threads, [&](std::size_t i) {
    const auto u = load_stems(rendered, rows[i].mixture_id);
    const auto sig = mixkit::task_signals(u, task);
    std::vector<std::vector<double>> est;
    for (std::size_t c = 0; c < sig.targets.size(); ++c) {
      const auto path = fs::path(estimates) / ("s" + std::to_string(c + 1)) / (rows[i].mixture_id + ".wav");
      const auto e = mixkit::read_wav(path).first_channel();
      if (e.frames() != sig.mixture.size()) throw mixkit::InvalidArgument(path.string() + ": length differs from reference");
      est.emplace_back(e.channel(0).begin(), e.channel(0).end());
    }
    result.per_utterance[i] = mixkit::score_utterance(rows[i].mixture_id, est, sig);
  });
  if (!csv.empty()) {
    if (fs::path(csv).has_parent_path()) fs::create_directories(fs::path(csv).parent_path());
    mixkit::export_per_utterance_csv(result, csv);
  }
  std::printf("%s: SI-SDR %.2f dB, input %.2f dB, improvement %.2f dB over %zu utterances (%zu at the cap)\n",
              mixkit::to_string(task).c_str(), result.mean_si_sdr(), result.mean_noisy(), result.mean_improvement(),
              rows.size(), result.capped_count());
  return kExitOk;
}

// ---- loss fixtures ------------------------------------------------------------

struct LossCase {
  mixkit::Spectrogram X;
  std::vector<mixkit::Spectrogram> sources;
  std::vector<mixkit::RealMatrix> masks;
  mixkit::EmbeddingLabelPair pair;
  double alpha = 0.975;
};

LossCase load_loss_case(const fs::path& dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(mixkit::read_text(dir / "case.json"));
  } catch (const nlohmann::json::exception& e) {
    throw mixkit::IoError((dir / "case.json").string() + ": " + e.what());
  }
  LossCase c;
  c.X = mixkit::load_spectrogram(dir / j.at("mixture").get<std::string>());
  for (const auto& s : j.at("sources")) c.sources.push_back(mixkit::load_spectrogram(dir / s.get<std::string>()));
  for (const auto& m : j.at("masks")) c.masks.push_back(mixkit::load_real(dir / m.get<std::string>()));
  c.pair.V = mixkit::load_real(dir / j.at("embeddings").get<std::string>());
  c.pair.Y = mixkit::load_real(dir / j.at("labels").get<std::string>());
  c.pair.W = j.contains("weights") ? mixkit::Vector(mixkit::load_real(dir / j["weights"].get<std::string>()).col(0))
                                   : mixkit::magnitude_ratio_weights(c.X);
  if (j.contains("noise_mask")) {
    const auto n = mixkit::load_real(dir / j["noise_mask"].get<std::string>());
    for (Eigen::Index i = 0; i < n.rows(); ++i) c.pair.noise_mask.push_back(n(i, 0) != 0.0);
  }
  c.alpha = j.value("alpha", 0.975);
  return c;
}

int cmd_make_loss_fixture(const RunConfig& rc, double seconds, int dim) {
  const auto out = require_out(rc);
  const int rate = 8000;
  mixkit::Rng rng(rc.seed.value_or(1));
  const auto n = static_cast<std::size_t>(seconds * rate);
  auto s1 = mixkit::synth::speech_surrogate(rng, n, rate, 120.0);
  auto s2 = mixkit::synth::speech_surrogate(rng, n, rate, 210.0);
  auto noise = mixkit::synth::ambient_noise(rng, n, rate, 0.7);
  mixkit::synth::scale_to_rms_db(s1, -20.0);
  mixkit::synth::scale_to_rms_db(s2, -23.0);
  mixkit::synth::scale_to_rms_db(noise, -24.0);
  std::vector<double> mix(n);
  for (std::size_t i = 0; i < n; ++i) mix[i] = s1[i] + s2[i] + noise[i];
  const auto cfg = mixkit::StftConfig::for_rate(rate);
  const auto X = mixkit::stft(mixkit::AudioBuffer::mono(mix, rate), cfg);
  const auto S1 = mixkit::stft(mixkit::AudioBuffer::mono(s1, rate), cfg);
  const auto S2 = mixkit::stft(mixkit::AudioBuffer::mono(s2, rate), cfg);
  const auto N = mixkit::stft(mixkit::AudioBuffer::mono(noise, rate), cfg);
  const auto F = X.bins.rows(), T = X.bins.cols();

  // Masks: perturbed ratio masks kept inside (0.02, 0.98).
  std::vector<mixkit::RealMatrix> masks;
  for (const auto* s : {&S1, &S2}) {
    mixkit::RealMatrix m(F, T);
    for (Eigen::Index f = 0; f < F; ++f) {
      for (Eigen::Index t = 0; t < T; ++t) {
        const double a = std::abs(s->bins(f, t)), b = std::abs(X.bins(f, t));
        const double irm = a / (a + b + 1e-12);
        m(f, t) = std::clamp(irm + 0.2 * (rng.uniform01() - 0.5), 0.02, 0.98);
      }
    }
    masks.push_back(m);
  }
  mixkit::RealMatrix V(F * T, dim), Y = mixkit::RealMatrix::Zero(F * T, 2), noise_mask(F * T, 1);
  for (Eigen::Index f = 0; f < F; ++f) {
    for (Eigen::Index t = 0; t < T; ++t) {
      const auto row = f * T + t;
      const double a = std::abs(S1.bins(f, t)), b = std::abs(S2.bins(f, t)), c = std::abs(N.bins(f, t));
      Y(row, a >= b ? 0 : 1) = 1.0;
      noise_mask(row, 0) = c > std::max(a, b) ? 1.0 : 0.0;
      for (int d = 0; d < dim; ++d) V(row, d) = mixkit::synth::gaussian(rng);
      V.row(row).normalize();
    }
  }
  mixkit::dump_spectrogram(out / "X", X);
  mixkit::dump_spectrogram(out / "S1", S1);
  mixkit::dump_spectrogram(out / "S2", S2);
  mixkit::dump_real(out / "M1", masks[0]);
  mixkit::dump_real(out / "M2", masks[1]);
  mixkit::dump_real(out / "V", V);
  mixkit::dump_real(out / "Y", Y);
  mixkit::dump_real(out / "noise_mask", noise_mask);
  json c;
  c["mixture"] = "X";
  c["sources"] = {"S1", "S2"};
  c["masks"] = {"M1", "M2"};
  c["embeddings"] = "V";
  c["labels"] = "Y";
  c["noise_mask"] = "noise_mask";
  c["alpha"] = 0.975;
  mixkit::write_text(out / "case.json", c.dump(2) + "\n");
  log("make-loss-fixture: F=" + std::to_string(F) + " T=" + std::to_string(T) + " D=" + std::to_string(dim));
  return kExitOk;
}

// Steps for the finite-difference checks. tPSA is piecewise linear in the masks,
// so a small step has no truncation error and rarely crosses a kink. The DC
// losses are smooth in V but their per-entry gradients shrink with TF and with
// the weight spread, so at dump sizes a 1e-6 step is dominated by round-off.
struct LossCheckSteps {
  double tpsa = 1e-6;
  double dc = 1e-4;
};

int cmd_loss_check(const RunConfig& rc, const std::string& fixture, double tolerance, LossCheckSteps steps) {
  const auto c = load_loss_case(fixture);
  c.pair.validate();
  const auto F = c.X.bins.rows(), T = c.X.bins.cols();
  const auto seed = rc.seed.value_or(0);
  bool all_ok = true;
  std::printf("%-16s %16s %14s %8s\n", "loss", "value", "max_rel_err", "grad");

  auto report = [&](const char* name, double value, const std::optional<mixkit::GradCheckReport>& g) {
    if (g) {
      std::printf("%-16s %16.9g %14.3e %8s\n", name, value, g->max_relative_error, g->passed ? "ok" : "FAIL");
      all_ok = all_ok && g->passed;
    } else {
      std::printf("%-16s %16.9g %14s %8s\n", name, value, "-", "-");
    }
  };
  const mixkit::GradCheckOptions tpsa_opts{.epsilon = steps.tpsa, .tolerance = tolerance, .max_coordinates = 64, .seed = seed};
  auto dc_opts = tpsa_opts;
  dc_opts.epsilon = steps.dc;

  // tPSA with respect to the stacked masks.
  const auto tpsa = mixkit::tpsa_loss(c.masks, c.X, c.sources);
  {
    const auto k = static_cast<Eigen::Index>(c.masks.size());
    Eigen::VectorXd x(k * F * T), g(k * F * T);
    for (Eigen::Index m = 0; m < k; ++m) {
      x.segment(m * F * T, F * T) = mixkit::flatten(c.masks[static_cast<std::size_t>(m)]);
      g.segment(m * F * T, F * T) = mixkit::flatten(tpsa.mask_gradients[static_cast<std::size_t>(m)]);
    }
    std::vector<mixkit::ComplexMatrix> src;
    for (const auto& s : c.sources) src.push_back(s.bins);
    auto f = [&](const Eigen::VectorXd& v) {
      std::vector<mixkit::RealMatrix> ms;
      for (Eigen::Index m = 0; m < k; ++m) ms.push_back(mixkit::unflatten(v.segment(m * F * T, F * T), F, T));
      return mixkit::tpsa_loss(ms, c.X.bins, src).value;
    };
    report("tpsa", tpsa.value, mixkit::grad_check(f, x, g, tpsa_opts));
  }

  auto dc = [&](const char* name, auto kernel) {
    const auto v = kernel(c.pair.V);
    auto f = [&](const Eigen::VectorXd& x) { return kernel(mixkit::unflatten(x, c.pair.V.rows(), c.pair.V.cols())).value; };
    report(name, v.value, mixkit::grad_check(f, mixkit::flatten(c.pair.V), mixkit::flatten(v.embedding_gradient), dc_opts));
    return v;
  };
  const auto& p = c.pair;
  const auto classic = dc("dc_classic", [&](const mixkit::RealMatrix& V) { return mixkit::kernels::dc_classic(V, p.Y, p.W); });
  dc("dc_whitened", [&](const mixkit::RealMatrix& V) { return mixkit::kernels::dc_whitened(V, p.Y, p.W); });
  if (!p.noise_mask.empty()) {
    dc("dc_noise_aware", [&](const mixkit::RealMatrix& V) { return mixkit::kernels::dc_noise_aware(V, p.Y, p.W, p.noise_mask); });
  }
  const auto chimera = mixkit::chimera_loss(classic, tpsa, c.alpha);
  char name[32];
  std::snprintf(name, sizeof name, "chimera(a=%.3g)", c.alpha);
  report(name, chimera.value, std::nullopt);
  std::printf("permutation: %s\n", mixkit::format_permutation(tpsa.permutation).c_str());
  if (!all_ok) throw VerificationFailure("gradient check failed");
  return kExitOk;
}

int cmd_digest(const std::string& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), dir));
  }
  std::sort(files.begin(), files.end());
  std::uint64_t h = mixkit::fnv1a64("");
  for (const auto& f : files) {
    h = mixkit::fnv1a64(f.generic_string() + '\0', h);
    h = mixkit::fnv1a64(mixkit::read_text(fs::path(dir) / f), h);
  }
  std::printf("%s  %zu files\n", mixkit::hex64(h).c_str(), files.size());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Noisy speech-mixture toolkit: curate, plan, render, verify, evaluate"};
  app.set_version_flag("--version", std::string(mixkit::kToolVersion));
  app.require_subcommand(1);

  Flags f;
  auto common = [&](CLI::App* sub, bool seed, bool mode_rate, bool out) {
    sub->add_option("--config", f.config_file, "JSON config file (flags take precedence)")->check(CLI::ExistingFile);
    sub->add_option("--threads", f.threads, "worker threads, 0 = all cores");
    sub->add_option("--root", f.root, "directory that relative data paths are resolved against");
    if (seed) sub->add_option("--seed", f.seed, "global 64-bit seed");
    if (mode_rate) {
      sub->add_option("--mode", f.mode, "min or max")->check(CLI::IsMember({"min", "max"}));
      sub->add_option("--rate", f.rate, "output sample rate")->check(CLI::IsMember({8000, 16000}));
      sub->add_option("--split", f.split, "noise split: train, valid or test");
    }
    if (out) sub->add_option("--out", f.out, "output directory");
  };

  mixkit::synth::CorpusOptions synth_opts;
  auto* synth = app.add_subcommand("synth", "write a synthetic speech + noise mini-corpus");
  common(synth, true, false, true);
  synth->add_option("--locations", synth_opts.locations, "number of noise locations");
  synth->add_option("--noise-seconds", synth_opts.noise_seconds, "length of each noise recording");
  synth->add_option("--train-pairs", synth_opts.train_pairs);
  synth->add_option("--valid-pairs", synth_opts.valid_pairs);
  synth->add_option("--test-pairs", synth_opts.test_pairs);
  synth->add_option("--leak-fraction", synth_opts.leak_fraction, "share of chunks with leaked speech");

  std::string metadata;
  auto* curate = app.add_subcommand("curate", "bin, split and leak-filter a noise corpus into an index");
  common(curate, false, false, true);
  curate->add_option("--metadata", metadata, "metadata CSV")->required()->check(CLI::ExistingFile);

  std::string index_path, pairs_path;
  auto* plan = app.add_subcommand("plan", "draw a mixture manifest");
  common(plan, true, true, true);
  plan->add_option("--index", index_path, "noise index JSON")->required()->check(CLI::ExistingFile);
  plan->add_option("--pairs", pairs_path, "speech pair list CSV")->required()->check(CLI::ExistingFile);

  std::string manifest, rendered, estimates, task = "all", csv;
  double tolerance = 0.1;
  auto* render = app.add_subcommand("render", "render a manifest to mix/ s1/ s2/ noise/");
  common(render, false, false, true);
  render->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);

  auto* verify = app.add_subcommand("verify", "re-measure rendered mixtures against their manifest");
  common(verify, false, false, false);
  verify->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
  verify->add_option("--rendered", rendered)->required()->check(CLI::ExistingDirectory);
  verify->add_option("--tolerance", tolerance, "dB");

  auto* oracle = app.add_subcommand("oracle-eval", "oracle-mask SI-SDR table over rendered mixtures");
  common(oracle, false, false, true);
  oracle->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
  oracle->add_option("--rendered", rendered)->required()->check(CLI::ExistingDirectory);
  oracle->add_option("--task", task, "task name or 'all'");

  auto* eval = app.add_subcommand("eval", "score estimates (s1/, s2/ under --estimates) against rendered references");
  common(eval, false, false, false);
  eval->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
  eval->add_option("--rendered", rendered)->required()->check(CLI::ExistingDirectory);
  eval->add_option("--estimates", estimates)->required()->check(CLI::ExistingDirectory);
  eval->add_option("--task", task)->required();
  eval->add_option("--csv", csv, "per-utterance CSV output");

  std::string fixture;
  double grad_tolerance = 1e-4;
  auto* loss = app.add_subcommand("loss-check", "evaluate the training losses on a dumped case and check gradients");
  common(loss, true, false, false);
  loss->add_option("--fixture", fixture)->required()->check(CLI::ExistingDirectory);
  loss->add_option("--tolerance", grad_tolerance, "max relative error");
  LossCheckSteps steps;
  loss->add_option("--tpsa-step", steps.tpsa, "finite-difference step for the mask loss");
  loss->add_option("--dc-step", steps.dc, "finite-difference step for the embedding losses");

  double fixture_seconds = 0.12;
  int fixture_dim = 4;
  auto* make_fixture = app.add_subcommand("make-loss-fixture", "dump a synthetic loss-check case");
  common(make_fixture, true, false, true);
  make_fixture->add_option("--seconds", fixture_seconds);
  make_fixture->add_option("--dim", fixture_dim, "embedding dimension");

  std::string digest_dir;
  auto* digest = app.add_subcommand("digest", "content digest of a directory tree");
  digest->add_option("dir", digest_dir)->required()->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitIo;
  }

  try {
    auto* sub = app.get_subcommands().front();
    const auto rc = resolve(sub->get_name(), *sub, f);
    if (sub == synth) return cmd_synth(rc, synth_opts);
    if (sub == curate) return cmd_curate(rc, metadata);
    if (sub == plan) return cmd_plan(rc, index_path, pairs_path);
    if (sub == render) return cmd_render(rc, manifest);
    if (sub == verify) return cmd_verify(rc, manifest, rendered, tolerance);
    if (sub == oracle) return cmd_oracle_eval(rc, manifest, rendered, task);
    if (sub == eval) return cmd_eval(rc, manifest, rendered, estimates, task, csv);
    if (sub == loss) return cmd_loss_check(rc, fixture, grad_tolerance, steps);
    if (sub == make_fixture) return cmd_make_loss_fixture(rc, fixture_seconds, fixture_dim);
    if (sub == digest) return cmd_digest(digest_dir);
  } catch (const mixkit::ConstraintError& e) {
    log(std::string("error: ") + e.what());
    return kExitConstraint;
  } catch (const VerificationFailure& e) {
    log(std::string("error: ") + e.what());
    return kExitConstraint;
  } catch (const std::exception& e) {
    log(std::string("error: ") + e.what());
    return kExitIo;
  }
  return kExitIo;
}
