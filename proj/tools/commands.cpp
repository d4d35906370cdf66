#include "commands.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "hmof/error.hpp"
#include "hmof/pipeline.hpp"
#include "hmof/synth.hpp"

namespace hmof::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kDecisionsFile = "decisions.csv";
constexpr const char* kPatchScoresFile = "patch_scores.csv";
constexpr const char* kRunManifestFile = "manifest.txt";

std::string verdict_name(Verdict v) { return v == Verdict::abnormal ? "abnormal" : "normal"; }

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json curve_json(const RocCurve& curve) {
  json thresholds = json::array(), tpr = json::array(), fpr = json::array();
  for (const auto& p : curve.points) {
    thresholds.push_back(finite_or_null(p.threshold));
    tpr.push_back(p.tpr);
    fpr.push_back(p.fpr);
  }
  return {{"threshold", thresholds}, {"tpr", tpr}, {"fpr", fpr}};
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

FrameSequence load_stage_sequence(const std::string& stage, const Config& config,
                                  const std::string& dir_key) {
  try {
    return load_sequence(config.get(dir_key), config.get("paths.pattern"));
  } catch (const DataError& e) {
    throw DataError(stage + ": " + e.what());
  }
}

fs::path mask_dir_for(const Config& config) {
  if (!config.is_auto("paths.gt_masks")) return config.get("paths.gt_masks");
  return fs::path(config.get("paths.gt_path")).parent_path() / "masks";
}

SynthConfig synth_from_config(const Config& c) {
  SynthConfig s;
  s.width = c.get_int("synth.width");
  s.height = c.get_int("synth.height");
  s.frames = c.get_int("synth.frames");
  s.seed = c.get_u64("synth.seed");
  s.normal_count = c.get_int("synth.normal_count");
  s.normal_speed_min = c.get_double("synth.normal_speed_min");
  s.normal_speed_max = c.get_double("synth.normal_speed_max");
  s.anomaly_count = c.get_int("synth.anomaly_count");
  s.anomaly_speed_min = c.get_double("synth.anomaly_speed_min");
  s.anomaly_speed_max = c.get_double("synth.anomaly_speed_max");
  s.window_start = c.get_int("synth.window_start");
  s.window_end = c.get_int("synth.window_end");
  s.object_size = c.get_int("synth.object_size");
  s.edge_ramp = c.get_double("synth.edge_ramp");
  const std::string& dirs = c.get("synth.directions");
  if (dirs == "any") {
    s.directions = MotionDirections::any;
  } else if (dirs == "horizontal") {
    s.directions = MotionDirections::horizontal;
  } else {
    throw ConfigError("synth.directions: expected 'any' or 'horizontal', got '" + dirs + "'");
  }
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return s;
}

struct DecisionRow {
  std::size_t frame = 0;
  std::size_t foreground = 0;
  std::size_t abnormal = 0;
  double frame_score = 0.0;
  Verdict verdict = Verdict::normal;
};

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream in(line);
  std::string field;
  while (std::getline(in, field, ',')) fields.push_back(field);
  return fields;
}

std::vector<DecisionRow> read_decisions(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing detection output " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<DecisionRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 5) throw DataError(path.string() + ": malformed row '" + line + "'");
    try {
      rows.push_back({std::stoul(f[0]), std::stoul(f[1]), std::stoul(f[2]), std::stod(f[3]),
                      f[4] == "abnormal" ? Verdict::abnormal : Verdict::normal});
    } catch (const std::logic_error&) {
      throw DataError(path.string() + ": malformed row '" + line + "'");
    }
    if (rows.back().frame != rows.size() - 1) {
      throw DataError(path.string() + ": frames must be consecutive from 0");
    }
  }
  return rows;
}

std::vector<FramePatchScores> read_patch_scores(const fs::path& path, std::size_t frames) {
  std::ifstream in(path);
  if (!in) throw DataError("missing patch score dump " + path.string());
  std::vector<FramePatchScores> out(frames);
  for (std::size_t i = 0; i < frames; ++i) out[i].frame = i;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 3) throw DataError(path.string() + ": malformed row '" + line + "'");
    std::size_t frame = 0;
    PatchScore p;
    try {
      frame = std::stoul(f[0]);
      p.patch_id = std::stoul(f[1]);
      p.score = std::stod(f[2]);
    } catch (const std::logic_error&) {
      throw DataError(path.string() + ": malformed row '" + line + "'");
    }
    if (frame >= frames) throw DataError(path.string() + ": frame beyond decisions.csv");
    out[frame].patches.push_back(p);
  }
  return out;
}

}  // namespace

void cmd_train(const Config& config, bool force, std::ostream& log) {
  const PipelineSettings settings = PipelineSettings::from_config(config);
  const fs::path model_dir = config.get("paths.model_dir");
  if (model_exists(model_dir) && !force) {
    throw ModelError("train: models already exist in " + model_dir.string() +
                     " (pass --force to overwrite)");
  }
  const FrameSequence sequence = load_stage_sequence("train", config, "paths.train_dir");
  TrainingReport report;
  TrainedModel model;
  try {
    model = train_pipeline(sequence, settings, &report);
  } catch (const DataError& e) {
    throw DataError(std::string("train: ") + e.what());
  }
  save_model(model_dir, model, config, report, sequence);
  log << "trained on " << sequence.size() << " frames, " << report.patches
      << " foreground patches\n"
      << "delta = " << format_double(report.delta) << "\n"
      << "alpha = " << format_double(model.alpha) << "\n"
      << "models written to " << model_dir.string() << "\n";
}

void cmd_detect(const Config& config, std::ostream& log) {
  const PipelineSettings settings = PipelineSettings::from_config(config);
  const fs::path out_dir = config.get("paths.out_dir");
  const TrainedModel model = load_model(config.get("paths.model_dir"));
  const FrameSequence sequence = load_stage_sequence("detect", config, "paths.test_dir");
  const DetectionRun run = detect(sequence, model, settings);
  const double alpha = effective_alpha(model, settings);

  fs::create_directories(out_dir);
  {
    auto out = open_output(out_dir / kDecisionsFile);
    out << "frame,n_foreground_patches,n_abnormal_patches,frame_score,verdict\n";
    for (const auto& r : run.frames) {
      out << r.decision.frame << "," << r.foreground_patches << "," << r.decision.abnormal_count
          << "," << format_double(r.decision.frame_score) << "," << verdict_name(r.decision.verdict)
          << "\n";
    }
  }
  if (config.get_bool("out.patch_scores")) {
    auto out = open_output(out_dir / kPatchScoresFile);
    out << "frame,patch_id,score\n";
    for (const auto& r : run.frames)
      for (const auto& p : r.scores)
        out << r.decision.frame << "," << p.patch_id << "," << format_double(p.score) << "\n";
  }
  if (config.get_bool("out.masks")) {
    fs::create_directories(out_dir / "masks");
    for (const auto& r : run.frames) {
      const BinaryMask mask = r.decision.verdict == Verdict::abnormal
                                  ? patch_mask(run.grid, r.decision.abnormal_patches)
                                  : BinaryMask(run.grid.frame_width(), run.grid.frame_height());
      write_mask(out_dir / "masks" / mask_filename(r.decision.frame), mask);
    }
  }
  const bool want_features = config.get_bool("out.features");
  const bool want_alpha = config.get_bool("out.alpha_maps");
  const bool want_flow = config.get_bool("out.flow");
  if (want_features || want_alpha || want_flow) {
    // Inspection exports replay the foreground stage; they do not affect decisions.
    ForegroundTracker tracker(settings.foreground, run.grid);
    std::vector<FeatureRecord> features;
    if (want_alpha) fs::create_directories(out_dir / "alpha");
    if (want_flow) fs::create_directories(out_dir / "flow");
    for (std::size_t i = 0; i < sequence.size(); ++i) {
      const PatchSelection selection = tracker.step(sequence[i]);
      if (want_alpha) write_alpha_pgm(out_dir / "alpha" / mask_filename(i), tracker.last_alpha());
      if (i == 0 || !(want_flow || (want_features && !selection.selected.empty()))) continue;
      const FlowField flow = estimate_flow(sequence[i - 1], sequence[i], settings.flow);
      if (want_flow) {
        char name[32];
        std::snprintf(name, sizeof name, "%06zu.flow", i);
        write_flow(out_dir / "flow" / name, flow);
      }
      if (want_features) {
        for (std::size_t id : selection.selected) {
          features.push_back({i, id, describe(patch_flow(flow, run.grid, id), model.descriptor)});
        }
      }
    }
    if (want_features) write_feature_csv(out_dir / "features.csv", features);
  }
  {
    auto out = open_output(out_dir / kRunManifestFile);
    char hex[32];
    std::snprintf(hex, sizeof hex, "%016llx",
                  static_cast<unsigned long long>(fingerprint(sequence)));
    out << "# detection manifest\n"
        << config.dump() << "data.fingerprint = " << hex << "\n"
        << "data.frames = " << sequence.size() << "\n"
        << "detect.alpha = " << format_double(alpha) << "\n"
        << "detect.beta = " << settings.beta << "\n"
        << "detect.patch_size = " << model.patch_size << "\n";
  }
  std::size_t abnormal = 0;
  for (const auto& r : run.frames) abnormal += r.decision.verdict == Verdict::abnormal;
  log << "detected " << abnormal << " abnormal of " << run.frames.size() << " frames (alpha "
      << format_double(alpha) << ", beta " << settings.beta << ")\n"
      << "outputs written to " << out_dir.string() << "\n";
}

EvalSummary cmd_eval(const Config& config, std::ostream& log) {
  const fs::path out_dir = config.get("paths.out_dir");
  const auto decisions = read_decisions(out_dir / kDecisionsFile);
  const GroundTruth truth = load_ground_truth(config.get("paths.gt_path"), mask_dir_for(config));
  if (truth.size() != decisions.size()) {
    throw DataError("eval: ground truth has " + std::to_string(truth.size()) +
                    " frames but detection has " + std::to_string(decisions.size()));
  }
  std::map<std::string, std::string> run_manifest;
  if (fs::exists(out_dir / kRunManifestFile)) {
    run_manifest = read_key_values(out_dir / kRunManifestFile);
  }
  auto manifest_value = [&](const std::string& key) -> std::optional<std::string> {
    auto it = run_manifest.find(key);
    if (it == run_manifest.end()) return std::nullopt;
    return it->second;
  };

  std::vector<double> scores;
  for (const auto& d : decisions) scores.push_back(d.frame_score);
  const RocCurve frame_curve = roc(scores, truth.labels);

  EvalSummary summary;
  summary.auc_frame = auc(frame_curve);
  summary.eer_frame = eer(frame_curve);

  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    const bool flagged = decisions[i].verdict == Verdict::abnormal;
    const bool anomalous = truth.labels[i] == Label::abnormal;
    (anomalous ? (flagged ? tp : fn) : (flagged ? fp : tn)) += 1;
  }

  json report;
  report["frames"] = decisions.size();
  report["auc_frame"] = summary.auc_frame;
  report["eer_frame"] = summary.eer_frame;
  report["frame_confusion"] = {
      {"true_positive", tp}, {"false_negative", fn}, {"false_positive", fp}, {"true_negative", tn}};

  std::vector<std::string> pixel_verdicts(decisions.size());
  if (truth.masks) {
    const auto beta_text = manifest_value("detect.beta");
    const auto size_text = manifest_value("detect.patch_size");
    const auto alpha_text = manifest_value("detect.alpha");
    if (!beta_text || !size_text || !alpha_text) {
      throw DataError("eval: " + (out_dir / kRunManifestFile).string() +
                      " lacks detect.alpha/beta/patch_size needed for pixel-level metrics");
    }
    const int beta = std::stoi(*beta_text);
    const double alpha = std::stod(*alpha_text);
    const BinaryMask& first = truth.masks->front();
    const PatchGrid grid = partition(first.width, first.height, std::stoi(*size_text));
    const auto patch_scores = read_patch_scores(out_dir / kPatchScoresFile, decisions.size());
    const RocCurve pixel_curve = pixel_roc(patch_scores, *truth.masks, grid, beta);
    summary.has_pixel = true;
    summary.auc_pixel = auc(pixel_curve);
    summary.eer_pixel = eer(pixel_curve);
    report["auc_pixel"] = summary.auc_pixel;
    report["eer_pixel"] = summary.eer_pixel;
    report["roc_pixel"] = curve_json(pixel_curve);
    for (std::size_t i = 0; i < decisions.size(); ++i) {
      pixel_verdicts[i] = to_string(pixel_level_verdict(
          detection_mask(grid, patch_scores[i], alpha, beta), (*truth.masks)[i]));
    }
  } else {
    report["auc_pixel"] = nullptr;
    report["eer_pixel"] = nullptr;
    report["pixel_note"] = "masks absent";
  }
  report["roc_frame"] = curve_json(frame_curve);

  fs::create_directories(out_dir);
  {
    auto out = open_output(out_dir / "report.json");
    out << report.dump(2) << "\n";
  }
  {
    auto out = open_output(out_dir / "eval_frames.csv");
    out << "frame,label,frame_score,verdict,pixel_verdict\n";
    for (std::size_t i = 0; i < decisions.size(); ++i) {
      out << i << "," << (truth.labels[i] == Label::abnormal ? "abnormal" : "normal") << ","
          << format_double(decisions[i].frame_score) << "," << verdict_name(decisions[i].verdict)
          << "," << (truth.masks ? pixel_verdicts[i] : "") << "\n";
    }
  }

  char line[128];
  std::snprintf(line, sizeof line, "frame-level AUC %.4f  EER %.4f\n", summary.auc_frame,
                summary.eer_frame);
  log << line;
  if (summary.has_pixel) {
    std::snprintf(line, sizeof line, "pixel-level AUC %.4f  EER %.4f\n", summary.auc_pixel,
                  summary.eer_pixel);
    log << line;
  } else {
    log << "pixel-level metrics skipped: masks absent\n";
  }
  log << "report written to " << (out_dir / "report.json").string() << "\n";
  return summary;
}

void cmd_synth(const Config& config, std::ostream& log) {
  const SynthConfig synth = synth_from_config(config);
  const fs::path dir = config.get("paths.synth_dir");
  const SynthSequence seq = generate(synth);
  write_synth(dir, seq);
  std::size_t abnormal = 0;
  for (Label l : seq.truth.labels) abnormal += l == Label::abnormal;
  log << "wrote " << seq.frames.size() << " frames (" << abnormal << " abnormal) to "
      << dir.string() << "\n";
}

void cmd_bench(const Config& config, std::ostream& log) {
  const PipelineSettings settings = PipelineSettings::from_config(config);
  const TrainedModel model = load_model(config.get("paths.model_dir"));
  const FrameSequence sequence = load_stage_sequence("bench", config, "paths.test_dir");
  const StageTimings t = benchmark(sequence, model, settings);
  log << format_timings_table(t, "Ours");
  json j = {{"frames", t.frames},       {"width", t.width},           {"height", t.height},
            {"foreground", t.foreground}, {"optical_flow", t.flow},   {"feature", t.feature},
            {"autoencoder", t.autoencoder}, {"gmm", t.gmm},           {"total", t.total},
            {"threads", 1}};
  if (settings.threads > 1) {
    const double fps = throughput(sequence, model, settings, settings.threads);
    j["throughput"] = {{"threads", settings.threads}, {"frames_per_second", fps}};
    log << "throughput with " << settings.threads << " threads: " << fps << " frames/s\n";
  }
  const fs::path out_dir = config.get("paths.out_dir");
  fs::create_directories(out_dir);
  auto out = open_output(out_dir / "timings.json");
  out << j.dump(2) << "\n";
}

void cmd_ablate(const Config& config, bool force, std::ostream& log) {
  const fs::path model_root = config.get("paths.model_dir");
  const fs::path out_root = config.get("paths.out_dir");
  json table = json::array();
  std::ostringstream quiet;
  char line[128];
  std::snprintf(line, sizeof line, "%-8s %10s %10s %10s %10s\n", "feature", "AUC(FL)", "EER(FL)",
                "AUC(PL)", "EER(PL)");
  std::string rows = line;
  for (const char* kind : {"hmof", "mhof", "hof"}) {
    Config run = config;
    run.set("feat.kind", kind);
    run.set("paths.model_dir", (model_root / kind).string());
    run.set("paths.out_dir", (out_root / kind).string());
    cmd_train(run, force, quiet);
    cmd_detect(run, quiet);
    const EvalSummary s = cmd_eval(run, quiet);
    json entry = {{"kind", kind}, {"auc_frame", s.auc_frame}, {"eer_frame", s.eer_frame}};
    entry["auc_pixel"] = s.has_pixel ? json(s.auc_pixel) : json(nullptr);
    entry["eer_pixel"] = s.has_pixel ? json(s.eer_pixel) : json(nullptr);
    table.push_back(entry);
    if (s.has_pixel) {
      std::snprintf(line, sizeof line, "%-8s %10.4f %10.4f %10.4f %10.4f\n", kind, s.auc_frame,
                    s.eer_frame, s.auc_pixel, s.eer_pixel);
    } else {
      std::snprintf(line, sizeof line, "%-8s %10.4f %10.4f %10s %10s\n", kind, s.auc_frame,
                    s.eer_frame, "-", "-");
    }
    rows += line;
  }
  log << rows;
  fs::create_directories(out_root);
  auto out = open_output(out_root / "ablation.json");
  out << table.dump(2) << "\n";
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Real-time video anomaly detection with magnitude optical-flow histograms", "hmof"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> overrides;
  std::string pattern;
  bool force = false;
  bool print_config = false;

  struct Sub {
    const char* name;
    const char* help;
  };
  const Sub subs[] = {
      {"train", "calibrate delta, train autoencoder and GMM, calibrate alpha"},
      {"detect", "score a test sequence and write per-frame decisions"},
      {"eval", "frame- and pixel-level ROC, AUC and EER against ground truth"},
      {"synth", "generate a synthetic sequence with planted anomalies"},
      {"bench", "per-stage running time per frame"},
      {"ablate", "train/detect/eval with hmof, mhof and hof descriptors"},
  };
  for (const auto& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    sub->add_option("--config", config_path, "key = value configuration file");
    sub->add_option("--set", overrides, "override section.key=value (repeatable)");
    sub->add_option("--pattern", pattern, "frame filename glob (paths.pattern)");
    sub->add_flag("--force", force, "overwrite existing models");
    sub->add_flag("--print-config", print_config, "print the resolved configuration and exit");
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    Config config;
    if (!config_path.empty()) config.load_file(config_path);
    if (!pattern.empty()) config.set("paths.pattern", pattern);
    for (const auto& o : overrides) config.apply_override(o);
    if (print_config) {
      out << config.dump();
      return kOk;
    }
    if (command == "train") cmd_train(config, force, out);
    if (command == "detect") cmd_detect(config, out);
    if (command == "eval") cmd_eval(config, out);
    if (command == "synth") cmd_synth(config, out);
    if (command == "bench") cmd_bench(config, out);
    if (command == "ablate") cmd_ablate(config, force, out);
    return kOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ModelError& e) {
    err << "model error: " << e.what() << "\n";
    return kModelError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  }
}

}  // namespace hmof::cli
