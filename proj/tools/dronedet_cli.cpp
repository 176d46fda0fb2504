// dronedet: batch workflows for the drone-detector toolkit. Subcommands
// cover architecture validation, dilation planning, anchor generation,
// anchor matching diagnostics, augmentation previews, COCO-style evaluation
// and dataset handling. Exit codes: 0 success, 1 runtime failure, 2 usage.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "dronedet/anchors.hpp"
#include "dronedet/augment.hpp"
#include "dronedet/config.hpp"
#include "dronedet/datasetio.hpp"
#include "dronedet/dilation.hpp"
#include "dronedet/evalkit.hpp"
#include "dronedet/image_io.hpp"
#include "dronedet/matching.hpp"
#include "dronedet/pyramid.hpp"

namespace fs = std::filesystem;
using namespace dronedet;

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_ratio(double r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", r);
  return buf;
}

std::vector<int> parse_rate_list(const std::string& csv) {
  std::vector<int> rates;
  for (const std::string& part : detail::split_on(csv, ','))
    rates.push_back(std::stoi(part));
  return rates;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw_io("cannot open '", path, "' for writing");
  out << text;
  if (!out.good()) throw_io("write failed for '", path, "'");
}

void require_file(const std::string& path) {
  if (!fs::is_regular_file(path)) throw_io("no such file: '", path, "'");
}

// ---------------------------------------------------------------------------

struct ValidateArchArgs {
  int width_div = 16;
  bool no_fms = false;
  bool no_fmre = false;
  bool run_forward = false;
  std::string emit_graph;
};

int run_validate_arch(const RunConfig& cfg, const ValidateArchArgs& args) {
  BackboneConfig backbone;
  backbone.width_divider = args.width_div;
  ArchGraph graph = build_backbone(backbone);
  if (!args.no_fms) graph = attach_fms(graph);
  if (!args.no_fmre) graph = attach_fmre(graph);

  std::printf("layer   stride  size      channels\n");
  for (const ShapeRow& row : shape_table(graph))
    std::printf("%-7s %-7d %3dx%-5d %d\n", row.name.c_str(), row.stride,
                row.height, row.width, row.channels);
  for (const auto& rates : graph.registered_rate_sequences)
    if (!hdc_check(rates, 3).pass)
      throw_value("registered dilation rates violate the constraint");
  std::printf("shape check: ok (%zu nodes, %zu dilation sequences)\n",
              graph.nodes.size(), graph.registered_rate_sequences.size());

  if (!args.emit_graph.empty()) {
    write_text(args.emit_graph, serialize_graph(graph));
    std::printf("graph written: %s\n", args.emit_graph.c_str());
  }
  if (args.run_forward) {
    std::printf("seed: %llu\n", static_cast<unsigned long long>(cfg.seed));
    Rng rng(cfg.seed);
    Grid input = Grid::random(3, 512, 512, rng, 0.0, 1.0);
    ForwardResult result = forward_pyramid(graph, input, cfg.seed);
    int want = 128;
    for (int k = 1; k <= 8; ++k) {
      const Grid& m = result.at(detail::cat("enh_", k));
      if (m.height() != want || m.width() != want)
        throw_shape("forward produced ", m.height(), "x", m.width(),
                    " for level ", k, ", expected ", want);
      want /= 2;
    }
    std::printf("forward: ok (8 maps, 128..1 halving chain)\n");
  }
  return 0;
}

// ---------------------------------------------------------------------------

int run_plan_dilations(int depth, int kernel, int max_rate) {
  DilationPlan plan = plan_rates(depth, kernel, max_rate);
  std::printf("kernel: %d\n", plan.kernel);
  std::printf("rates: ");
  for (std::size_t i = 0; i < plan.rates.size(); ++i)
    std::printf("%s%d", i ? "," : "", plan.rates[i]);
  std::printf("\nmax_distances: ");
  for (std::size_t i = 0; i < plan.max_distances.size(); ++i)
    std::printf("%s%d", i ? "," : "", plan.max_distances[i]);
  CoverageMap map = coverage_map_auto(plan.rates, plan.kernel);
  std::printf("\nholes=%s\n", map.has_interior_zero() ? "true" : "false");
  return 0;
}

struct CoverageArgs {
  std::string rates_csv = "1,2,3";
  int kernel = 3;
  int grid = 0;  // 0 = auto
  std::string out_csv;
  std::string out_svg;
};

int run_coverage_map(const CoverageArgs& args) {
  std::vector<int> rates = parse_rate_list(args.rates_csv);
  CoverageMap map = args.grid > 0 ? coverage_map(rates, args.kernel, args.grid)
                                  : coverage_map_auto(rates, args.kernel);
  HdcWitness witness = hdc_check(rates, args.kernel);
  std::printf("rates:");
  for (std::size_t i = 0; i < rates.size(); ++i)
    std::printf("%s%d", i ? "," : " ", rates[i]);
  std::printf(" kernel: %d grid: %d\n", args.kernel, map.grid_size);
  std::printf("hdc_check=%s (%s)\n", witness.pass ? "pass" : "fail",
              witness.reason.c_str());
  std::printf("holes=%s\n", map.has_interior_zero() ? "true" : "false");
  std::printf("min_interior_count=%lld\n", map.min_interior_count());
  std::printf("total_paths=%lld\n", map.total());
  if (!args.out_csv.empty()) write_text(args.out_csv, coverage_to_csv(map));
  if (!args.out_svg.empty()) write_text(args.out_svg, coverage_to_svg(map));
  return 0;
}

// ---------------------------------------------------------------------------

struct GenAnchorsArgs {
  std::string out_csv;
  bool summary = false;
  bool ssd300 = false;
};

int run_gen_anchors(const RunConfig& cfg, const GenAnchorsArgs& args) {
  std::vector<LayerAnchorConfig> configs;
  int image_size;
  if (args.ssd300) {
    configs = ssd300_reference_configs();
    image_size = 300;
  } else {
    configs = cfg.anchors.layer_configs();
    image_size = cfg.anchors.image_size;
  }
  AnchorSet set = generate_anchors(configs, image_size);

  if (args.summary || args.out_csv.empty()) {
    std::printf("layer   stride  size      scale      ratios  per_cell  anchors\n");
    for (std::size_t l = 0; l < configs.size(); ++l) {
      const LayerAnchorConfig& c = configs[l];
      std::printf("%-7s %-7d %3dx%-5d %3.0f(%3.0f)   %-7zu %-9d %lld\n",
                  c.name.c_str(), c.stride, c.grid_h, c.grid_w, c.min_size,
                  c.max_size, c.ratios.size(), c.anchors_per_cell(),
                  c.anchor_count());
    }
    std::printf("total anchors: %zu\n", set.size());
  }

  if (!args.out_csv.empty()) {
    std::ostringstream os;
    os << "dronedet.anchors.v1\n";
    os << "layer,cell_y,cell_x,ratio_tag,x_min,y_min,x_max,y_max\n";
    std::size_t index = 0;
    for (const LayerAnchorConfig& c : configs) {
      int per_cell = c.anchors_per_cell();
      for (int i = 0; i < c.grid_h; ++i)
        for (int j = 0; j < c.grid_w; ++j)
          for (int slot = 0; slot < per_cell; ++slot, ++index) {
            const Box& b = set.boxes[index];
            os << c.name << ',' << i << ',' << j << ','
               << (slot < static_cast<int>(c.ratios.size())
                       ? fmt_ratio(c.ratios[slot])
                       : "extra")
               << ',' << fmt17(b.x_min) << ',' << fmt17(b.y_min) << ','
               << fmt17(b.x_max) << ',' << fmt17(b.y_max) << '\n';
          }
    }
    write_text(args.out_csv, os.str());
    std::printf("anchors written: %s (%zu rows)\n", args.out_csv.c_str(),
                set.size());
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct MatchArgs {
  std::string annotations;
  std::string out_csv;
};

int run_match(const RunConfig& cfg, const MatchArgs& args) {
  require_file(args.annotations);
  IngestResult data = ingest("canonical", args.annotations);
  for (const Reject& r : data.rejects)
    std::fprintf(stderr, "reject: %s:%d: %s\n", r.file.c_str(), r.line,
                 r.reason.c_str());

  AnchorSet anchors = generate_anchors(cfg.anchors.layer_configs(),
                                       cfg.anchors.image_size);
  std::ostringstream os;
  os << "dronedet.matchreport.v1\n";
  std::vector<long long> per_layer(anchors.layer_ranges.size(), 0);
  for (const AnnotationRecord& record : data.records) {
    std::vector<Box> gts;
    for (const AnnotationBox& b : record.boxes)
      gts.push_back(to_normalized(b.box, record.width, record.height));
    MatchResult m = match(anchors, gts, cfg.iou_threshold);
    os << "image," << record.image_id << ',' << gts.size() << ','
       << m.positive_count() << '\n';
    for (std::size_t a = 0; a < m.labels.size(); ++a)
      if (m.labels[a] >= 0) ++per_layer[anchors.layer_of(a)];
  }
  for (std::size_t l = 0; l < per_layer.size(); ++l)
    os << "layer," << anchors.configs[l].name << ',' << per_layer[l] << '\n';

  if (args.out_csv.empty()) std::fputs(os.str().c_str(), stdout);
  else {
    write_text(args.out_csv, os.str());
    std::printf("match report written: %s\n", args.out_csv.c_str());
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct AugmentArgs {
  std::string annotations;
  std::string images_dir;
  std::string out_dir;
  int count = 0;  // 0 = all
  bool preview = false;
};

int run_augment(const RunConfig& cfg, const AugmentArgs& args) {
  require_file(args.annotations);
  IngestResult data = ingest("canonical", args.annotations);
  fs::create_directories(args.out_dir);

  std::printf("seed: %llu\n", static_cast<unsigned long long>(cfg.seed));
  Rng root(cfg.seed);
  std::vector<AnnotationRecord> transformed;
  int done = 0;
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    if (args.count > 0 && done >= args.count) break;
    const AnnotationRecord& record = data.records[i];
    fs::path image_path = fs::path(args.images_dir) / record.image_path;
    if (!fs::is_regular_file(image_path)) {
      std::fprintf(stderr, "skip: missing image '%s'\n",
                   image_path.string().c_str());
      continue;
    }
    Sample sample;
    sample.image = read_ppm(image_path.string());
    for (const AnnotationBox& b : record.boxes) {
      sample.gts.push_back(
          to_normalized(b.box, record.width, record.height).clipped());
      sample.gt_classes.push_back(1);
    }

    Rng rng = root.fork(i + 1);
    PipelineResult result = pipeline(sample, rng, cfg.augment);

    if (args.preview)
      write_ppm(sample.image,
                (fs::path(args.out_dir) / (record.image_id + "_before.ppm"))
                    .string());
    std::string out_name = record.image_id + "_aug.ppm";
    write_ppm(result.sample.image,
              (fs::path(args.out_dir) / out_name).string());

    AnnotationRecord out_record;
    out_record.image_id = record.image_id + "_aug";
    out_record.image_path = out_name;
    out_record.width = result.sample.image.width();
    out_record.height = result.sample.image.height();
    out_record.source = record.source;
    out_record.scenario = record.scenario;
    out_record.scenario_hint = record.scenario_hint;
    for (const Box& b : result.sample.gts) {
      AnnotationBox ab;
      ab.box = to_pixels(b, out_record.width, out_record.height);
      out_record.boxes.push_back(ab);
    }
    transformed.push_back(std::move(out_record));
    ++done;
  }
  std::string ann_out = (fs::path(args.out_dir) / "annotations.tsv").string();
  write_records(transformed, ann_out);
  std::printf("augmented %d sample(s); annotations: %s\n", done,
              ann_out.c_str());
  return 0;
}

// ---------------------------------------------------------------------------

std::vector<Detection> read_detections(const std::string& path) {
  require_file(path);
  std::ifstream in(path);
  std::string line;
  if (!std::getline(in, line) || line != "dronedet.detections.v1")
    throw_io("detections parse (", path, "): missing schema tag");
  std::vector<Detection> dets;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f = detail::split_on(line, ',');
    if (f.size() != 6)
      throw_io("detections parse (", path, ":", line_no,
               "): expected image_id,x_min,y_min,x_max,y_max,score");
    Detection d;
    d.image_id = f[0];
    d.box = {std::stod(f[1]), std::stod(f[2]), std::stod(f[3]),
             std::stod(f[4])};
    d.score = std::stod(f[5]);
    d.id = line_no - 2;
    dets.push_back(std::move(d));
  }
  return dets;
}

struct EvaluateArgs {
  std::string gt_path;
  std::string det_path;
  std::string out_dir;
};

int run_evaluate(const RunConfig& cfg, const EvaluateArgs& args) {
  require_file(args.gt_path);
  IngestResult data = ingest("canonical", args.gt_path);
  std::vector<GroundTruth> gts;
  for (const AnnotationRecord& r : data.records) {
    if (r.unreliable) continue;  // shared multi-frame labels stay out
    for (const AnnotationBox& b : r.boxes) gts.push_back({r.image_id, b.box});
  }
  std::vector<Detection> dets = read_detections(args.det_path);

  EvalOptions options;
  options.workers = cfg.workers;
  EvalReport report = coco_summary(dets, gts, options);
  emit_report(report, args.out_dir);
  for (const auto& [name, value] : report.metric_rows())
    std::printf("%-10s %s\n", name.c_str(), fmt17(value).c_str());
  std::printf("report: %s/report.csv\ncurves: %s/pr_curves.svg\n",
              args.out_dir.c_str(), args.out_dir.c_str());
  return 0;
}

// ---------------------------------------------------------------------------

struct DatasetArgs {
  std::string layout;
  std::string root;
  std::string out;
  std::string in;
  double val_fraction = 0.10;
  std::string out_train;
  std::string out_val;
};

int run_dataset_ingest(const DatasetArgs& args) {
  IngestResult result = ingest(args.layout, args.root);
  write_records(result.records, args.out);
  if (!result.rejects.empty()) {
    std::ostringstream os;
    os << "dronedet.rejects.v1\n";
    for (const Reject& r : result.rejects)
      os << r.file << '\t' << r.line << '\t' << r.reason << '\n';
    write_text(args.out + ".rejects", os.str());
  }
  std::printf("ingested %zu record(s), %zu reject(s): %s\n",
              result.records.size(), result.rejects.size(), args.out.c_str());
  return 0;
}

int run_dataset_split(const RunConfig& cfg, const DatasetArgs& args) {
  require_file(args.in);
  IngestResult data = ingest("canonical", args.in);
  std::printf("seed: %llu\n", static_cast<unsigned long long>(cfg.seed));
  SplitResult s = split(data.records, args.val_fraction, cfg.seed);
  write_records(s.train, args.out_train);
  write_records(s.val, args.out_val);
  std::printf("split %zu -> train %zu / val %zu\n", data.records.size(),
              s.train.size(), s.val.size());
  return 0;
}

int run_dataset_stats(const DatasetArgs& args) {
  require_file(args.in);
  IngestResult data = ingest("canonical", args.in);
  auto tagged = tag_scenario(data.records);
  std::map<std::string, int> by_source, by_scenario;
  std::size_t boxes = 0, unreliable = 0;
  for (const AnnotationRecord& r : tagged) {
    ++by_source[source_name(r.source)];
    ++by_scenario[scenario_name(r.scenario)];
    boxes += r.boxes.size();
    unreliable += r.unreliable ? 1 : 0;
  }
  std::printf("records: %zu\nboxes: %zu\nunreliable: %zu\n",
              tagged.size(), boxes, unreliable);
  for (const auto& [name, count] : by_source)
    std::printf("source %s: %d\n", name.c_str(), count);
  for (const auto& [name, count] : by_scenario)
    std::printf("scenario %s: %d\n", name.c_str(), count);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"drone-detector toolkit"};
  app.set_config("--config", "", "flat key=value configuration file");
  app.require_subcommand(1);

  RunConfig cfg;
  app.add_option("--seed", cfg.seed, "random seed (echoed by every run)")
      ->capture_default_str();
  app.add_option("--workers", cfg.workers, "worker pool size")
      ->envname("DRONEDET_WORKERS")
      ->capture_default_str();
  app.add_option("--iou-threshold", cfg.iou_threshold,
                 "anchor assignment IoU threshold")
      ->capture_default_str();
  app.add_option("--s-min", cfg.anchors.s_min, "lowest layer anchor scale")
      ->capture_default_str();
  app.add_option("--s-max", cfg.anchors.s_max, "highest layer anchor scale")
      ->capture_default_str();
  app.add_option("--beta", cfg.anchors.beta,
                 "comma-separated per-layer scale decay weights")
      ->delimiter(',');
  app.add_option("--image-size", cfg.anchors.image_size,
                 "anchor reference image size")
      ->capture_default_str();
  app.add_option("--crop-prob", cfg.augment.crop_probability,
                 "anchor-based crop branch probability")
      ->capture_default_str();
  app.add_option("--blur-sigma-min", cfg.augment.blur_sigma_min,
                 "lower bound of the blur sigma range")
      ->capture_default_str();
  app.add_option("--blur-sigma-max", cfg.augment.blur_sigma_max,
                 "upper bound of the blur sigma range")
      ->capture_default_str();
  app.add_option("--out-size", cfg.augment.out_size,
                 "augmentation output resolution")
      ->capture_default_str();
  // Recorded training defaults; no subcommand trains, they are kept so a
  // config file is a complete experiment record.
  app.add_option("--train-momentum", cfg.training.momentum, "")
      ->capture_default_str()->group("training defaults (recorded)");
  app.add_option("--train-weight-decay", cfg.training.weight_decay, "")
      ->capture_default_str()->group("training defaults (recorded)");
  app.add_option("--train-lr", cfg.training.learning_rate, "")
      ->capture_default_str()->group("training defaults (recorded)");
  app.add_option("--train-lr-decay", cfg.training.lr_decay, "")
      ->capture_default_str()->group("training defaults (recorded)");
  app.add_option("--train-lr-decay-epochs", cfg.training.lr_decay_every_epochs,
                 "")
      ->capture_default_str()->group("training defaults (recorded)");
  app.add_option("--train-batch-size", cfg.training.batch_size, "")
      ->capture_default_str()->group("training defaults (recorded)");

  auto* validate = app.add_subcommand("validate-arch",
                                      "build the pyramid graph and print the "
                                      "shape/stride table");
  ValidateArchArgs va;
  validate->add_option("--width-div", va.width_div,
                       "channel width divider (desk-scale execution)")
      ->capture_default_str();
  validate->add_flag("--no-fms", va.no_fms, "skip the supplement attachment");
  validate->add_flag("--no-fmre", va.no_fmre,
                     "skip the recombination enhancement");
  validate->add_flag("--forward", va.run_forward,
                     "execute a seeded random forward pass");
  validate->add_option("--emit-graph", va.emit_graph,
                       "write the line-delimited graph serialization here");

  auto* plan = app.add_subcommand("plan-dilations",
                                  "search a constraint-satisfying serial "
                                  "dilation rate sequence");
  int plan_depth = 3, plan_kernel = 3, plan_max_rate = 8;
  plan->add_option("--depth", plan_depth, "number of serial convolutions")
      ->required();
  plan->add_option("--kernel", plan_kernel, "kernel size")->capture_default_str();
  plan->add_option("--max-rate", plan_max_rate, "search bound")
      ->capture_default_str();

  auto* coverage = app.add_subcommand("coverage-map",
                                      "tap-path coverage analysis of a serial "
                                      "dilated stack");
  CoverageArgs ca;
  coverage->add_option("--rates", ca.rates_csv, "comma-separated dilation rates")
      ->capture_default_str();
  coverage->add_option("--kernel", ca.kernel, "kernel size")->capture_default_str();
  coverage->add_option("--grid", ca.grid, "grid size (0 = fit automatically)");
  coverage->add_option("--out", ca.out_csv, "write the count map as CSV");
  coverage->add_option("--svg", ca.out_svg, "write a monochrome heatmap");

  auto* gen = app.add_subcommand("gen-anchors",
                                 "enumerate the tailored default boxes");
  GenAnchorsArgs ga;
  gen->add_option("--out", ga.out_csv, "write the full anchor CSV here");
  gen->add_flag("--summary", ga.summary, "print the per-layer summary table");
  gen->add_flag("--ssd300", ga.ssd300,
                "use the classic 300-input six-layer configuration");

  auto* match_cmd = app.add_subcommand("match",
                                       "per-image anchor assignment "
                                       "diagnostics");
  MatchArgs ma;
  match_cmd->add_option("--annotations", ma.annotations,
                        "canonical annotation file")->required();
  match_cmd->add_option("--out", ma.out_csv, "write the report here");

  auto* augment_cmd = app.add_subcommand("augment",
                                         "run the augmentation sampler over "
                                         "a dataset");
  AugmentArgs aa;
  augment_cmd->add_option("--annotations", aa.annotations,
                          "canonical annotation file")->required();
  augment_cmd->add_option("--images", aa.images_dir,
                          "directory with the referenced .ppm images")
      ->required();
  augment_cmd->add_option("--out", aa.out_dir, "output directory")->required();
  augment_cmd->add_option("--count", aa.count, "max samples (0 = all)")
      ->capture_default_str();
  augment_cmd->add_flag("--preview", aa.preview,
                        "also write the untouched before-images");

  auto* evaluate = app.add_subcommand("evaluate",
                                      "COCO-style metric family and PR curves");
  EvaluateArgs ea;
  evaluate->add_option("--gt", ea.gt_path, "canonical annotation file")
      ->required();
  evaluate->add_option("--det", ea.det_path, "detections file")->required();
  evaluate->add_option("--out", ea.out_dir, "output directory")->required();

  auto* dataset = app.add_subcommand("dataset", "annotation ingestion and splits");
  dataset->require_subcommand(1);
  DatasetArgs da;
  auto* d_ingest = dataset->add_subcommand("ingest",
                                           "normalize a source layout");
  d_ingest->add_option("--layout", da.layout,
                       "canonical|real_world|midgard|det_fly|drone_vs_bird|"
                       "usc_drone")
      ->required();
  d_ingest->add_option("--root", da.root, "source root (or canonical file)")
      ->required();
  d_ingest->add_option("--out", da.out, "canonical output file")->required();
  auto* d_split = dataset->add_subcommand("split", "seeded validation split");
  d_split->add_option("--in", da.in, "canonical annotation file")->required();
  d_split->add_option("--val", da.val_fraction, "validation fraction")
      ->capture_default_str();
  d_split->add_option("--out-train", da.out_train, "train output")->required();
  d_split->add_option("--out-val", da.out_val, "validation output")->required();
  auto* d_stats = dataset->add_subcommand("stats", "corpus statistics");
  d_stats->add_option("--in", da.in, "canonical annotation file")->required();

  // Global options remain usable after a subcommand name.
  for (CLI::App* sub : app.get_subcommands({})) {
    sub->fallthrough();
    for (CLI::App* nested : sub->get_subcommands({})) nested->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    std::fprintf(stderr, "usage: run '%s --help' for the command reference\n",
                 argv[0]);
    return 2;
  }

  try {
    if (cfg.augment.crop_probability < 0.0 || cfg.augment.crop_probability > 1.0)
      throw_value("crop probability must be in [0,1]");
    if (cfg.augment.flip_probability < 0.0 || cfg.augment.flip_probability > 1.0 ||
        cfg.augment.jitter_probability < 0.0 ||
        cfg.augment.jitter_probability > 1.0)
      throw_value("flip/jitter probabilities must be in [0,1]");
    if (cfg.iou_threshold < 0.0 || cfg.iou_threshold > 1.0)
      throw_value("IoU threshold must be in [0,1]");
    if (app.got_subcommand(validate)) return run_validate_arch(cfg, va);
    if (app.got_subcommand(plan))
      return run_plan_dilations(plan_depth, plan_kernel, plan_max_rate);
    if (app.got_subcommand(coverage)) return run_coverage_map(ca);
    if (app.got_subcommand(gen)) return run_gen_anchors(cfg, ga);
    if (app.got_subcommand(match_cmd)) return run_match(cfg, ma);
    if (app.got_subcommand(augment_cmd)) return run_augment(cfg, aa);
    if (app.got_subcommand(evaluate)) return run_evaluate(cfg, ea);
    if (app.got_subcommand(dataset)) {
      if (dataset->got_subcommand(d_ingest)) return run_dataset_ingest(da);
      if (dataset->got_subcommand(d_split)) return run_dataset_split(cfg, da);
      if (dataset->got_subcommand(d_stats)) return run_dataset_stats(da);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
