#include "herdpipe/cli/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iterator>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "herdpipe/annotate/orchestrator.hpp"
#include "herdpipe/cli/config.hpp"
#include "herdpipe/core/parallel.hpp"
#include "herdpipe/distill/report.hpp"
#include "herdpipe/distill/trainer.hpp"
#include "herdpipe/error.hpp"
#include "herdpipe/eval/confusion.hpp"
#include "herdpipe/eval/metrics.hpp"
#include "herdpipe/io/convert.hpp"
#include "herdpipe/io/manifest.hpp"
#include "herdpipe/net/backend.hpp"
#include "herdpipe/pipeline/pipeline.hpp"

namespace herdpipe::cli {

namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

struct Globals {
  std::string config;
  bool json = false;
  std::optional<std::uint64_t> seed;
  int jobs = 0;
};

// Shared state handed to every subcommand.
struct Context {
  CliConfig cfg;
  const Globals& globals;
  std::ostream& out;
  std::ostream& err;

  void emit(const ojson& summary, const std::string& text) const {
    if (globals.json) {
      out << summary.dump(2) << "\n";
    } else {
      out << text;
    }
  }
};

CliConfig resolve_config(const Globals& g) {
  std::string path = g.config;
  if (path.empty()) {
    if (const char* env = std::getenv("HERDPIPE_CONFIG"); env != nullptr) path = env;
  }
  CliConfig cfg = path.empty() ? cli_config_from_json(nlohmann::json::object()) : load_cli_config(path);
  if (g.seed) {
    cfg.seed = *g.seed;
    cfg.pipeline.rng_seed = *g.seed;
  }
  if (g.jobs > 0) {
    cfg.annotate.max_concurrent = g.jobs;
    for (auto* spec : {&cfg.backends.teacher, &cfg.backends.segmenter, &cfg.backends.trainer, &cfg.backends.inference}) {
      if (*spec) (*spec)->max_concurrent = std::min((*spec)->max_concurrent, g.jobs);
    }
  }
  return cfg;
}

const net::BackendSpec& require_backend(const std::optional<net::BackendSpec>& spec, std::string_view role) {
  if (!spec) throw ConfigError(fmt::format("no '{}' backend configured (config backends.{})", role, role));
  return *spec;
}

// coco-json and csv are files; yolo-txt has data.yaml; voc-xml is a directory of .xml.
io::Format infer_format(const fs::path& path) {
  if (fs::is_directory(path)) {
    if (fs::exists(path / "data.yaml")) return io::Format::kYoloTxt;
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.path().extension() == ".xml") return io::Format::kVocXml;
    }
    throw ConfigError(fmt::format("cannot tell the format of directory '{}'; pass it explicitly", path.string()));
  }
  const auto ext = path.extension().string();
  if (ext == ".json") return io::Format::kCocoJson;
  if (ext == ".csv") return io::Format::kCsv;
  throw ConfigError(fmt::format("cannot tell the format of '{}'; pass it explicitly", path.string()));
}

io::Format format_or_infer(const std::string& token, const fs::path& path) {
  return token.empty() ? infer_format(path) : io::parse_format(token);
}

fs::path data_root_of(const fs::path& dataset) {
  return fs::is_directory(dataset) ? dataset : dataset.parent_path();
}

// --- extract-frames ---------------------------------------------------------

struct ExtractArgs {
  std::string video;
  std::string out;
  std::string id;
  std::optional<int> stride;
  std::vector<std::string> classes;
  bool preprocess = false;
};

int cmd_extract(Context& ctx, const ExtractArgs& a) {
  auto& cfg = ctx.cfg.pipeline;
  if (a.stride) cfg.frame_stride = *a.stride;
  cfg.validate();
  const auto classes = a.classes.empty() ? ctx.cfg.classes : a.classes;
  if (classes.empty()) throw ConfigError("extract-frames needs class names (--classes or config 'classes')");
  const std::string video_id = a.id.empty() ? fs::path(a.video).stem().string() : a.id;
  io::check_image_id(video_id);

  io::DatasetManifest manifest;
  manifest.classes = ClassSet(classes);
  if (a.preprocess) manifest.normalization = pipeline::normalization_metadata(cfg);
  const fs::path out_dir = a.out;
  pipeline::extract_frames(a.video, video_id, cfg.frame_stride, [&](pipeline::ExtractedFrame&& f) {
    const auto image = a.preprocess ? pipeline::preprocess(f.image, cfg) : std::move(f.image);
    pipeline::write_png(out_dir / f.name, image);
    manifest.records.push_back({fs::path(f.name).stem().string(), f.name, image.width, image.height,
                                io::Split::kTrain, io::Source::kHuman});
  });
  io::save_manifest(manifest, out_dir / "manifest.json");

  ojson s{{"command", "extract-frames"},
          {"video", a.video},
          {"stride", cfg.frame_stride},
          {"frames", manifest.records.size()},
          {"preprocessed", a.preprocess},
          {"out", a.out}};
  ctx.emit(s, fmt::format("extracted {} frames (stride {}) to {}\n", manifest.records.size(), cfg.frame_stride,
                          a.out));
  return kExitOk;
}

// --- annotate ---------------------------------------------------------------

struct AnnotateArgs {
  std::string manifest;
  std::string images;
  std::string out;
  std::optional<double> box_threshold;
  bool keep_scores = false;
  bool no_segment = false;
};

int cmd_annotate(Context& ctx, const AnnotateArgs& a) {
  fs::path manifest_path = a.manifest;
  if (manifest_path.empty()) manifest_path = ctx.cfg.dataset_root / "manifest.json";
  const auto manifest = io::load_manifest(manifest_path);

  auto opts = ctx.cfg.annotate;
  if (opts.prompts.empty() && !ctx.cfg.classes.empty() && ctx.cfg.classes != manifest.classes.names()) {
    throw ConfigError("config 'classes' differ from the manifest classes; set annotate.prompts instead");
  }
  if (!a.images.empty()) opts.image_root = a.images;
  if (opts.image_root.empty()) opts.image_root = manifest_path.parent_path();
  if (a.box_threshold) opts.box_threshold = *a.box_threshold;
  if (a.keep_scores) opts.keep_scores = true;

  auto teacher = annotate::make_teacher(require_backend(ctx.cfg.backends.teacher, "teacher"));
  std::unique_ptr<annotate::Segmenter> segmenter;
  if (!a.no_segment && ctx.cfg.backends.segmenter) segmenter = annotate::make_segmenter(*ctx.cfg.backends.segmenter);

  const auto result = annotate::annotate_dataset(manifest, opts, *teacher, segmenter.get());
  annotate::persist(result, a.out);

  std::size_t boxes = 0;
  std::size_t masks = 0;
  for (const auto& img : result.detections.images) boxes += img.boxes.size();
  for (const auto& img : result.segmentation.images) masks += img.masks.size();
  ojson s{{"command", "annotate"},
          {"images", manifest.records.size()},
          {"annotated", result.detections.images.size()},
          {"boxes", boxes},
          {"masks", masks},
          {"segmented", result.segmented},
          {"partial", result.partial()},
          {"failures", annotate::to_json(result.failures)},
          {"out", a.out}};
  std::string text = fmt::format("annotated {} of {} images: {} boxes, {} masks\n", result.detections.images.size(),
                                 manifest.records.size(), boxes, masks);
  for (const auto& f : result.failures) {
    ctx.err << fmt::format("failed: {} ({}): {}\n", f.image_id, f.stage, f.message);
  }
  ctx.emit(s, text);
  return result.partial() ? kExitPartial : kExitOk;
}

// --- convert ----------------------------------------------------------------

struct ConvertArgs {
  std::string in;
  std::string from;
  std::string out;
  std::string to;
  std::string manifest;
};

int cmd_convert(Context& ctx, const ConvertArgs& a) {
  const auto in_fmt = format_or_infer(a.from, a.in);
  const auto out_fmt = io::parse_format(a.to);
  const auto summary = io::convert(a.in, in_fmt, a.out, out_fmt, a.manifest);
  ojson s{{"command", "convert"},
          {"from", io::to_string(in_fmt)},
          {"to", io::to_string(out_fmt)},
          {"images", summary.images},
          {"boxes", summary.boxes},
          {"masks_dropped", summary.masks_dropped},
          {"scores_dropped", summary.scores_dropped},
          {"files_written", summary.files_written},
          {"out", a.out}};
  ctx.emit(s, summary.describe());
  return kExitOk;
}

// --- split ------------------------------------------------------------------

struct SplitArgs {
  std::string manifest;
  std::string out;
  std::vector<double> fractions;
};

int cmd_split(Context& ctx, const SplitArgs& a) {
  auto& cfg = ctx.cfg.pipeline;
  if (!a.fractions.empty()) {
    if (a.fractions.size() != 3) throw ConfigError("--fractions takes three values: train,valid,test");
    cfg.split_fractions = {a.fractions[0], a.fractions[1], a.fractions[2]};
  }
  fs::path in = a.manifest;
  if (in.empty()) in = ctx.cfg.dataset_root / "manifest.json";
  auto manifest = io::load_manifest(in);
  std::vector<std::string> ids;
  for (const auto& r : manifest.records) ids.push_back(r.id);
  const auto assignment = pipeline::split(ids, cfg.split_fractions, cfg.rng_seed);
  pipeline::apply_split(manifest, assignment);
  const fs::path out = a.out.empty() ? in : fs::path(a.out);
  io::save_manifest(manifest, out);

  const auto c = assignment.counts();
  ojson s{{"command", "split"},
          {"seed", cfg.rng_seed},
          {"fractions", cfg.split_fractions},
          {"counts", {{"train", c[0]}, {"valid", c[1]}, {"test", c[2]}}},
          {"out", out.string()}};
  ctx.emit(s, fmt::format("split {} images (seed {}): train {}, valid {}, test {}\n", ids.size(), cfg.rng_seed, c[0],
                          c[1], c[2]));
  return kExitOk;
}

// --- augment ----------------------------------------------------------------

struct AugmentArgs {
  std::string in;
  std::string from;
  std::string images;
  std::string out;
  std::optional<int> factor;
};

int cmd_augment(Context& ctx, const AugmentArgs& a) {
  auto& cfg = ctx.cfg.pipeline;
  if (a.factor) cfg.outputs_per_train_image = *a.factor;
  cfg.validate();
  const auto in_fmt = format_or_infer(a.from, a.in);
  const auto dataset = io::read_dataset(a.in, in_fmt);
  const fs::path root = a.images.empty() ? data_root_of(a.in) : fs::path(a.images);
  const fs::path out = a.out;

  const auto result = pipeline::augment_train(dataset, cfg);
  std::map<std::string, std::string> source_path;
  for (const auto& r : dataset.manifest.records) source_path[r.id] = r.path;

  // Originals are copied so the output directory is a self-contained dataset root.
  const auto& records = dataset.manifest.records;
  parallel_for(records.size(), std::max(1, ctx.globals.jobs), [&](std::size_t i) {
    const auto target = out / records[i].path;
    fs::create_directories(target.parent_path());
    fs::copy_file(root / records[i].path, target, fs::copy_options::overwrite_existing);
  });
  std::map<std::string, std::string> output_path;
  for (const auto& r : result.dataset.manifest.records) output_path[r.id] = r.path;
  parallel_for(result.choices.size(), std::max(1, ctx.globals.jobs), [&](std::size_t i) {
    const auto& choice = result.choices[i];
    const auto source = pipeline::read_image(root / source_path.at(choice.source_id));
    pipeline::write_png(out / output_path.at(choice.output_id), pipeline::apply_augmentation(source, choice));
  });
  io::write_dataset(result.dataset, out / "annotations.json", io::Format::kCocoJson);

  std::size_t train_in = 0;
  std::size_t train_out = 0;
  for (const auto& r : records) train_in += r.split == io::Split::kTrain;
  for (const auto& r : result.dataset.manifest.records) train_out += r.split == io::Split::kTrain;
  const auto grayscale = std::count_if(result.choices.begin(), result.choices.end(),
                                       [](const pipeline::AugmentChoice& c) { return c.grayscale; });
  ojson s{{"command", "augment"},
          {"seed", cfg.rng_seed},
          {"train_in", train_in},
          {"train_out", train_out},
          {"total", result.dataset.manifest.records.size()},
          {"copies", result.choices.size()},
          {"grayscale", grayscale},
          {"out", a.out}};
  ctx.emit(s, fmt::format("augmented train {} -> {} ({} grayscale copies), total {} images in {}\n", train_in,
                          train_out, grayscale, result.dataset.manifest.records.size(), a.out));
  return kExitOk;
}

// --- evaluate ---------------------------------------------------------------

struct EvaluateArgs {
  std::string gt;
  std::string gt_format;
  std::string pred;
  std::string pred_format;
  std::string manifest;
  std::string curves;
  bool confusion = false;
};

// Re-keys prediction class ids onto the ground-truth class set by name.
std::vector<AnnotatedImage> remap_classes(const io::Dataset& pred, const ClassSet& target) {
  std::vector<AnnotatedImage> out = pred.images;
  for (auto& img : out) {
    for (auto& b : img.boxes) b.class_id = target.id_of(pred.manifest.classes.name(b.class_id));
  }
  return out;
}

int cmd_evaluate(Context& ctx, const EvaluateArgs& a) {
  const auto gt = io::read_dataset(a.gt, format_or_infer(a.gt_format, a.gt), a.manifest);
  const auto pred = io::read_dataset(a.pred, format_or_infer(a.pred_format, a.pred), a.manifest);
  const auto predictions = remap_classes(pred, gt.manifest.classes);

  auto settings = ctx.cfg.eval;
  settings.metrics.classes = gt.manifest.classes;
  const auto report = eval::evaluate(gt.images, predictions, settings.metrics);
  if (!a.curves.empty()) io::write_text_file(a.curves, eval::curves_csv(report));

  ojson s{{"command", "evaluate"}, {"report", eval::to_json(report)}};
  std::string text = eval::render_table(report);
  if (a.confusion) {
    const auto cm = eval::confusion_matrix(gt.images, predictions, gt.manifest.classes, settings.confusion_iou,
                                           settings.confusion_confidence)
                        .normalized();
    s["confusion"] = cm.to_json();
    text += "\n" + cm.render();
  }
  ctx.emit(s, text);
  return kExitOk;
}

// --- distill ----------------------------------------------------------------

struct DistillArgs {
  std::string dataset;
  std::string model;
  std::optional<int> epochs;
  std::optional<int> batch;
  std::optional<int> image_size;
  std::string runs_dir;
};

int cmd_distill(Context& ctx, const DistillArgs& a) {
  auto hp = a.model.empty() ? ctx.cfg.distill.hyperparams : distill::default_hyperparams(a.model);
  if (a.epochs) hp.num_epochs = *a.epochs;
  if (a.batch) hp.batch_size = *a.batch;
  if (a.image_size) hp.image_size = *a.image_size;
  auto opts = ctx.cfg.distill.run;
  if (!a.runs_dir.empty()) opts.runs_dir = a.runs_dir;
  fs::path dataset = a.dataset;
  if (dataset.empty()) dataset = ctx.cfg.dataset_root;

  auto trainer = distill::make_trainer(require_backend(ctx.cfg.backends.trainer, "trainer"));
  const auto run = distill::run_distillation(dataset, hp, *trainer, opts);
  const bool ok = run.status == distill::RunStatus::kCompleted;
  const auto record = opts.runs_dir / (run.run_id + ".json");

  ojson s{{"command", "distill"},
          {"run_id", run.run_id},
          {"status", ok ? "completed" : "failed"},
          {"epochs", run.epochs.size()},
          {"diagnostics", run.diagnostics},
          {"record", record.string()}};
  std::string text = fmt::format("run {} {} after {} of {} epochs; record {}\n", run.run_id,
                                 ok ? "completed" : "failed", run.epochs.size(), hp.num_epochs, record.string());
  if (!run.epochs.empty()) {
    const auto& m = run.epochs.back().metrics;
    s["metrics"] = {{"ap", m.ap}, {"recall", m.recall}, {"ap50", m.ap50}, {"ap50_95", m.ap50_95}};
    text += fmt::format("final AP {} recall {} AP50 {} AP50-95 {}\n", m.ap, m.recall, m.ap50, m.ap50_95);
  }
  for (const auto& d : run.diagnostics) ctx.err << "diagnostic: " << d << "\n";
  ctx.emit(s, text);
  return ok ? kExitOk : kExitError;
}

// --- report -----------------------------------------------------------------

struct ReportArgs {
  std::string runs_dir;
  std::string summaries;
  std::string criterion = "max-ap";
  std::string csv;
  bool profiles = false;
};

int cmd_report(Context& ctx, const ReportArgs& a) {
  const auto criterion = distill::parse_criterion(a.criterion);
  std::vector<distill::RunSummary> runs;
  if (!a.summaries.empty()) {
    try {
      runs = distill::load_summaries(nlohmann::json::parse(io::read_text_file(a.summaries)));
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(fmt::format("{}: {}", a.summaries, e.what()));
    }
  }
  const fs::path runs_dir = !a.runs_dir.empty() ? fs::path(a.runs_dir) : ctx.cfg.distill.run.runs_dir;
  if (a.summaries.empty() || !a.runs_dir.empty()) {
    if (!fs::is_directory(runs_dir)) throw IoError(fmt::format("no runs directory '{}'", runs_dir.string()));
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(runs_dir)) {
      if (e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      const auto run = distill::load_run(f);
      if (run.epochs.empty()) {
        ctx.err << fmt::format("skipping run '{}': no epoch records\n", run.run_id);
        continue;
      }
      runs.push_back(distill::summarize(run));
    }
  }
  if (runs.empty()) throw DatasetError("no runs to report");

  const auto rows = distill::compare_runs(runs);
  const auto best = distill::select_best(rows, criterion);
  if (!a.csv.empty()) io::write_text_file(a.csv, distill::comparison_csv(rows));

  ojson list = ojson::array();
  for (const auto& r : rows) list.push_back(distill::to_json(r));
  ojson s{{"command", "report"}, {"criterion", distill::to_string(criterion)}, {"best", best}, {"runs", list}};
  std::string text = distill::render_comparison(rows);
  if (a.profiles) {
    std::vector<distill::RunSummary> profiled;
    std::copy_if(rows.begin(), rows.end(), std::back_inserter(profiled),
                 [](const distill::RunSummary& r) { return r.profile.has_value(); });
    if (!profiled.empty()) text += "\n" + distill::render_profiles(profiled);
  }
  text += fmt::format("\nbest ({}): {}\n", distill::to_string(criterion), best);
  ctx.emit(s, text);
  return kExitOk;
}

// --- profile ----------------------------------------------------------------

struct ProfileArgs {
  std::vector<std::string> probes;
  int trials = 20;
  int warmups = 3;
  std::string run;
};

int cmd_profile(Context& ctx, const ProfileArgs& a) {
  std::vector<std::string> probes;
  for (const auto& p : a.probes) probes.push_back(net::base64_encode(io::read_text_file(p)));
  std::optional<distill::RunRecord> run;
  if (!a.run.empty()) run = distill::load_run(a.run);

  auto backend = distill::make_inference_backend(require_backend(ctx.cfg.backends.inference, "inference"));
  auto profile = distill::profile_backend(*backend, probes, a.trials, a.warmups);
  if (run) {
    if (!run->epochs.empty()) profile.ap = run->epochs.back().metrics.ap;
    run->profile = profile;
    io::write_text_file(a.run, distill::to_json(*run).dump(2) + "\n");
  }
  ojson s{{"command", "profile"}, {"trials", a.trials}, {"profile", distill::to_json(profile)}};
  if (run) s["run_id"] = run->run_id;
  ctx.emit(s, fmt::format("layers {}  params {:.1f}M  flops {:.1f}G  weights {:.1f}Mb  fps {:.0f}  latency {:.1f} ms\n",
                          profile.layers, profile.params / 1e6, profile.flops / 1e9, profile.weight_bytes / 1e6,
                          profile.fps, profile.latency_ms));
  return kExitOk;
}

std::string format_list() {
  return "coco-json, voc-xml, yolo-txt, csv";
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Video-to-detector pipeline: frames, auto-annotation, formats, splits, augmentation, evaluation, "
               "distillation runs and profiling.",
               "herdpipe"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "JSON config file (falls back to $HERDPIPE_CONFIG)");
  app.add_flag("--json", g.json, "Print a machine-readable JSON summary on stdout");
  app.add_option("--seed", g.seed, "RNG seed for split and augment");
  app.add_option("--jobs", g.jobs, "Cap on worker parallelism")->check(CLI::PositiveNumber);

  ExtractArgs ex;
  auto* c_extract = app.add_subcommand("extract-frames", "Keep every stride-th video frame as PNG plus a manifest");
  c_extract->add_option("--video", ex.video, "Input video file")->required();
  c_extract->add_option("--out", ex.out, "Output directory")->required();
  c_extract->add_option("--id", ex.id, "Video id used in frame names (default: file stem)");
  c_extract->add_option("--stride", ex.stride, "Frame stride")->check(CLI::PositiveNumber);
  c_extract->add_option("--classes", ex.classes, "Class names for the manifest")->delimiter(',');
  c_extract->add_flag("--preprocess", ex.preprocess, "Apply brightness, contrast and denoise to each frame");

  AnnotateArgs an;
  auto* c_annotate = app.add_subcommand("annotate", "Label images with the teacher and optional segmenter");
  c_annotate->add_option("--manifest", an.manifest, "Manifest of images to label");
  c_annotate->add_option("--images", an.images, "Image root (default: the manifest's directory)");
  c_annotate->add_option("--out", an.out, "Output directory")->required();
  c_annotate->add_option("--box-threshold", an.box_threshold, "Minimum teacher confidence");
  c_annotate->add_flag("--keep-scores", an.keep_scores, "Store teacher confidences on the boxes");
  c_annotate->add_flag("--no-segment", an.no_segment, "Skip the segmenter");

  ConvertArgs cv;
  auto* c_convert = app.add_subcommand("convert", "Convert annotations between formats (" + format_list() + ")");
  c_convert->add_option("--in", cv.in, "Input file or directory")->required();
  c_convert->add_option("--from", cv.from, "Input format (default: inferred)");
  c_convert->add_option("--out", cv.out, "Output file or directory")->required();
  c_convert->add_option("--format,--to", cv.to, "Output format")->required();
  c_convert->add_option("--manifest", cv.manifest, "Manifest supplying image sizes and splits");

  SplitArgs sp;
  auto* c_split = app.add_subcommand("split", "Assign train/valid/test splits with a seeded shuffle");
  c_split->add_option("--manifest", sp.manifest, "Manifest to split");
  c_split->add_option("--out", sp.out, "Output manifest (default: rewrite in place)");
  c_split->add_option("--fractions", sp.fractions, "train,valid,test fractions")->delimiter(',');

  AugmentArgs ag;
  auto* c_augment = app.add_subcommand("augment", "Add cropped and grayscale copies of train images");
  c_augment->add_option("--in", ag.in, "Input dataset")->required();
  c_augment->add_option("--from", ag.from, "Input format (default: inferred)");
  c_augment->add_option("--images", ag.images, "Image root (default: the dataset's directory)");
  c_augment->add_option("--out", ag.out, "Output dataset root")->required();
  c_augment->add_option("--factor", ag.factor, "Outputs per train image, original included")
      ->check(CLI::PositiveNumber);

  EvaluateArgs ev;
  auto* c_evaluate = app.add_subcommand("evaluate", "Score predictions against ground truth");
  c_evaluate->add_option("--gt", ev.gt, "Ground-truth annotations")->required();
  c_evaluate->add_option("--gt-format", ev.gt_format, "Ground-truth format (default: inferred)");
  c_evaluate->add_option("--pred", ev.pred, "Predictions with confidences")->required();
  c_evaluate->add_option("--pred-format", ev.pred_format, "Prediction format (default: inferred)");
  c_evaluate->add_option("--manifest", ev.manifest, "Manifest for formats without image sizes");
  c_evaluate->add_option("--curves", ev.curves, "Write confidence curves as CSV");
  c_evaluate->add_flag("--confusion", ev.confusion, "Also print the column-normalized confusion matrix");

  DistillArgs ds;
  auto* c_distill = app.add_subcommand("distill", "Drive one training run on the trainer backend");
  c_distill->add_option("--dataset", ds.dataset, "yolo-txt dataset directory");
  c_distill->add_option("--model", ds.model, "Model variant; resets hyperparameters to its family defaults");
  c_distill->add_option("--epochs", ds.epochs, "Number of epochs");
  c_distill->add_option("--batch", ds.batch, "Batch size");
  c_distill->add_option("--image-size", ds.image_size, "Training image size");
  c_distill->add_option("--runs-dir", ds.runs_dir, "Where run records are written");

  ReportArgs rp;
  auto* c_report = app.add_subcommand("report", "Compare runs and select the best one");
  c_report->add_option("--runs-dir", rp.runs_dir, "Directory of run records");
  c_report->add_option("--summaries", rp.summaries, "JSON array of run summaries");
  c_report->add_option("--criterion", rp.criterion, "max-ap, max-ap50, max-recall or balanced");
  c_report->add_option("--csv", rp.csv, "Write the comparison as CSV");
  c_report->add_flag("--profiles", rp.profiles, "Also print the computational profiles");

  ProfileArgs pf;
  auto* c_profile = app.add_subcommand("profile", "Measure latency and throughput of the inference backend");
  c_profile->add_option("--probe", pf.probes, "Probe image (repeatable)")->required();
  c_profile->add_option("--trials", pf.trials, "Timed calls")->check(CLI::PositiveNumber);
  c_profile->add_option("--warmups", pf.warmups, "Untimed warm-up calls")->check(CLI::NonNegativeNumber);
  c_profile->add_option("--run", pf.run, "Run record to attach the profile to");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    out << sub->help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << "error: " << e.what() << "\n\n" << sub->help();
    return kExitError;
  }

  try {
    Context ctx{resolve_config(g), g, out, err};
    if (c_extract->parsed()) return cmd_extract(ctx, ex);
    if (c_annotate->parsed()) return cmd_annotate(ctx, an);
    if (c_convert->parsed()) return cmd_convert(ctx, cv);
    if (c_split->parsed()) return cmd_split(ctx, sp);
    if (c_augment->parsed()) return cmd_augment(ctx, ag);
    if (c_evaluate->parsed()) return cmd_evaluate(ctx, ev);
    if (c_distill->parsed()) return cmd_distill(ctx, ds);
    if (c_report->parsed()) return cmd_report(ctx, rp);
    if (c_profile->parsed()) return cmd_profile(ctx, pf);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}

}  // namespace herdpipe::cli
