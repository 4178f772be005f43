// rboxgeo command-line entry point.
#include "rboxgeo/assignment.hpp"
#include "rboxgeo/clickmap.hpp"
#include "rboxgeo/dataset.hpp"
#include "rboxgeo/decode.hpp"
#include "rboxgeo/eval.hpp"
#include "rboxgeo/losses.hpp"
#include "rboxgeo/mcp.hpp"
#include "rboxgeo/parallel.hpp"
#include "rboxgeo/pipeline.hpp"
#include "rboxgeo/raster_io.hpp"
#include "rboxgeo/rng.hpp"
#include "rboxgeo/synth.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace rboxgeo;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

// Raised for usage problems detected after parsing (bad values, missing files).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string input;
  std::string output;
  std::string gt;
  std::string plot;
  std::string pred_masks;
  std::string gt_masks;
  std::string predictions;
  std::string prompts;
  std::uint64_t seed{1};
  std::size_t seeds{50};
  double alpha{1.0};
  double beta{1.0};
  double eps{kAttentionEps};
  double gsd{1.0};
  std::string criterion{"rbox"};
  std::optional<double> thr;
  int steps{500};
  double lr{0.5};
  double noise{0.0};
  int workers{1};
  double mu1{1.0};
  double mu2{1.0};
  double mu3{1.0};
  double nms_thr{0.1};
  double score_floor{kScoreFloor};
  bool multi_output{false};
  std::string ranges{"fcos"};
  std::string distance_mode{"sigmoid"};
  std::string iou_form{"linear"};
  std::string centroid{"pixel-mean"};
  std::string prompt_mode{"hbox"};
  std::optional<double> rotated_fraction;
  std::string init;
  std::string gt_box;
  int height{128};
  int width{128};
  double click_x{64};
  double click_y{64};
  bool json_stdout{false};
  bool no_pyramids{false};
};

// -- small helpers -------------------------------------------------------------

bool use_color() {
  const char* nc = std::getenv("NO_COLOR");
  if (nc && *nc) return false;
  return isatty(fileno(stdout)) != 0;
}

std::string status_text(bool ok) {
  if (!use_color()) return ok ? "PASS" : "FAIL";
  return ok ? "\033[32mPASS\033[0m" : "\033[31mFAIL\033[0m";
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

void print_table(const std::vector<std::pair<std::string, std::string>>& rows) {
  std::size_t width = 0;
  for (const auto& [k, v] : rows) width = std::max(width, k.size());
  for (const auto& [k, v] : rows) std::cout << std::left << std::setw(static_cast<int>(width) + 2) << k << v << '\n';
}

std::ifstream open_input(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string("missing --") + what);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open " + std::string(what) + " file '" + path + "'");
  return in;
}

void write_text(const std::string& path, const std::string& text) {
  if (const fs::path parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write '" + path + "'");
  out << text;
}

// JSON artifact: to --output when given, otherwise to stdout with --json.
void emit_report(const Options& o, const json& report) {
  const std::string text = report.dump(2) + "\n";
  if (!o.output.empty()) write_text(o.output, text);
  if (o.json_stdout) std::cout << text;
}

Criterion criterion_of(const Options& o) { return parse_criterion(o.criterion); }

OSLossParams loss_params(const Options& o) {
  OSLossParams p;
  p.alpha = o.alpha;
  p.beta = o.beta;
  p.iou_form = o.iou_form == "log" ? IouLossForm::log : IouLossForm::linear;
  p.distance_mode = o.distance_mode == "centered" ? DistanceMode::centered : DistanceMode::sigmoid;
  return p;
}

CentroidMode centroid_of(const Options& o) {
  return o.centroid == "box-center" ? CentroidMode::box_center : CentroidMode::pixel_mean;
}

json box_json(const RBoxd& b) {
  json j;
  j["cx"] = b.cx;
  j["cy"] = b.cy;
  j["w"] = b.w;
  j["h"] = b.h;
  j["theta"] = radians_to_degrees(b.theta);
  return j;
}

// "cx,cy,w,h,theta_deg"
RBoxd parse_box(const std::string& text, const char* flag) {
  std::vector<double> v;
  std::stringstream s(text);
  std::string item;
  while (std::getline(s, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError(std::string("--") + flag + ": not a number: '" + item + "'");
    }
  }
  if (v.size() != 5) throw UsageError(std::string("--") + flag + " expects cx,cy,w,h,theta_deg");
  const RBoxd b{v[0], v[1], v[2], v[3], degrees_to_radians(v[4])};
  if (!is_valid(b)) throw UsageError(std::string("--") + flag + ": invalid box");
  return normalized(b);
}

json synth_config_json(const SynthConfig& c) {
  json j;
  j["image_h"] = c.image_h;
  j["image_w"] = c.image_w;
  j["query_h"] = c.query_h;
  j["query_w"] = c.query_w;
  j["min_side"] = c.min_side;
  j["max_side"] = c.max_side;
  j["theta_min_deg"] = c.theta_min_deg;
  j["theta_max_deg"] = c.theta_max_deg;
  j["rotated_fraction"] = c.rotated_fraction ? json(*c.rotated_fraction) : json(nullptr);
  j["min_rotation_deg"] = c.min_rotation_deg;
  j["channels"] = c.channels;
  j["noise"] = c.noise;
  return j;
}

SynthConfig synth_config(const Options& o) {
  SynthConfig c;
  c.noise = o.noise;
  c.rotated_fraction = o.rotated_fraction;
  try {
    validate(c);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return c;
}

json mask_metrics_json(const MaskMetrics& m) {
  json j;
  j["n"] = m.n;
  j["n_centered"] = m.n_centered;
  j["miou"] = m.miou;
  j["mdice"] = m.mdice;
  j["aae_m2"] = m.aae;
  j["me_m"] = m.me;
  return j;
}

json header(const char* command, json config) {
  json j;
  j["command"] = command;
  j["config"] = std::move(config);
  return j;
}

// -- subcommands -----------------------------------------------------------------

int cmd_validate(const Options& o) {
  auto in = open_input(o.input, "input");
  const ValidationReport r = validate(in);
  json config;
  config["input"] = o.input;
  json report = header("validate", config);
  report["records"] = r.records;
  json violations = json::array();
  for (const auto& v : r.violations) {
    json j;
    j["line"] = v.line;
    j["id"] = v.id;
    j["rule"] = v.rule;
    j["detail"] = v.detail;
    violations.push_back(j);
  }
  report["violations"] = violations;
  report["ok"] = r.ok();
  emit_report(o, report);
  if (!o.json_stdout) {
    for (const auto& v : r.violations)
      std::cout << "line " << v.line << "  " << (v.id.empty() ? "-" : v.id) << "  " << v.rule << "  " << v.detail
                << '\n';
    std::cout << r.records << " records, " << r.violations.size() << " violations  " << status_text(r.ok())
              << '\n';
  }
  return r.ok() ? kExitOk : kExitFail;
}

int cmd_convert(const Options& o) {
  auto in = open_input(o.input, "input");
  if (o.output.empty()) throw UsageError("missing --output");
  const ValidationReport check = validate(in);
  if (!check.ok()) {
    for (const auto& v : check.violations)
      std::cerr << o.input << " line " << v.line << ": " << v.rule << ": " << v.detail << '\n';
    return kExitFail;
  }
  in.clear();
  in.seekg(0);
  std::vector<AnnotationRecord> records = read_records(in);
  for (auto& r : records) r = hbox_from_rbox_record(r);
  std::ostringstream out;
  write_records(out, records);
  write_text(o.output, out.str());
  if (!o.json_stdout) std::cout << "converted " << records.size() << " records -> " << o.output << '\n';
  return kExitOk;
}

int cmd_synth(const Options& o) {
  if (o.output.empty()) throw UsageError("missing --output directory");
  const SynthConfig c = synth_config(o);
  const fs::path dir(o.output);
  fs::create_directories(dir / "pyramids");

  std::vector<std::string> lines(o.seeds);
  std::vector<std::string> mask_lines(o.seeds);
  parallel_for(o.seeds, o.workers, [&](std::size_t n) {
    const SyntheticScene s = batch_scene(o.seed, n, c);
    const AnnotationRecord r = scene_record(s);
    lines[n] = to_jsonl_line(r);
    json m;
    m["id"] = r.id;
    const json rle = rle_to_json(s.raster);
    for (const auto& [k, v] : rle.items()) m[k] = v;
    mask_lines[n] = m.dump();
    if (!o.no_pyramids) {
      std::ofstream q(dir / r.query_image, std::ios::binary);
      write_pyramid(q, s.query);
      std::ofstream ref(dir / r.reference_image, std::ios::binary);
      write_pyramid(ref, s.reference);
      if (!q || !ref) throw std::runtime_error("failed writing pyramids for " + r.id);
    }
  });
  std::string ann;
  std::string masks;
  for (std::size_t n = 0; n < o.seeds; ++n) {
    ann += lines[n] + "\n";
    masks += mask_lines[n] + "\n";
  }
  write_text((dir / "annotations.jsonl").string(), ann);
  write_text((dir / "masks.jsonl").string(), masks);

  json config;
  config["seed"] = o.seed;
  config["seeds"] = o.seeds;
  config["synth"] = synth_config_json(c);
  json manifest = header("synth", config);
  manifest["annotations"] = "annotations.jsonl";
  manifest["masks"] = "masks.jsonl";
  manifest["pyramids"] = !o.no_pyramids;
  manifest["count"] = o.seeds;
  write_text((dir / "manifest.json").string(), manifest.dump(2) + "\n");
  if (o.json_stdout)
    std::cout << manifest.dump(2) << '\n';
  else
    std::cout << "wrote " << o.seeds << " scenes to " << o.output << '\n';
  return kExitOk;
}

int cmd_clickmap(const Options& o) {
  if (o.output.empty()) throw UsageError("missing --output");
  const ImagePlane plane{o.height, o.width};
  const ClickPoint<double> click{o.click_x, o.click_y};
  if (plane.h < 1 || plane.w < 1) throw UsageError("--height and --width must be positive");
  if (!click_in_plane(plane, click)) throw UsageError("click lies outside the image");
  const ScalarMap<double> map = make_click_map(plane, click);
  if (const fs::path parent = fs::path(o.output).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream out(o.output, std::ios::binary);
  if (!out) throw UsageError("cannot write '" + o.output + "'");
  write_pfm(out, map);
  if (!o.json_stdout)
    print_table({{"size", std::to_string(plane.h) + "x" + std::to_string(plane.w)},
                 {"click", fmt(click.x) + "," + fmt(click.y)},
                 {"min", fmt(map.minCoeff())},
                 {"max", fmt(map.maxCoeff())},
                 {"output", o.output}});
  return kExitOk;
}

// Predictions joined to annotations by id, in annotation order.
std::vector<BoxPair> join_predictions(const std::vector<AnnotationRecord>& gts,
                                      const std::vector<PredictionRecord>& preds,
                                      std::vector<std::string>& missing) {
  std::map<std::string, RBoxd> best;
  std::map<std::string, double> best_score;
  for (const auto& p : preds) {
    auto it = best_score.find(p.id);
    if (it == best_score.end() || p.score > it->second) {
      best[p.id] = p.rbox;
      best_score[p.id] = p.score;
    }
  }
  std::vector<BoxPair> pairs;
  for (const auto& g : gts) {
    auto it = best.find(g.id);
    if (it == best.end()) {
      missing.push_back(g.id);
      continue;
    }
    pairs.push_back({it->second, g.gt_rbox});
  }
  return pairs;
}

std::vector<AnnotationRecord> read_gt(const Options& o) {
  auto in = open_input(o.gt, "gt");
  const ValidationReport check = validate(in);
  if (!check.ok()) {
    for (const auto& v : check.violations)
      std::cerr << o.gt << " line " << v.line << ": " << v.rule << ": " << v.detail << '\n';
    throw std::runtime_error("ground-truth file failed validation");
  }
  in.clear();
  in.seekg(0);
  return read_records(in);
}

std::vector<PredictionRecord> read_pred(const Options& o) {
  auto in = open_input(o.input, "input");
  return read_predictions(in);
}

int cmd_eval(const Options& o) {
  const Criterion crit = criterion_of(o);
  const double thr = o.thr.value_or(0.5);
  const auto gts = read_gt(o);
  const auto preds = read_pred(o);
  std::vector<std::string> missing;
  const auto pairs = join_predictions(gts, preds, missing);
  for (const auto& id : missing) std::cerr << "no prediction for '" << id << "'\n";

  EvalReport r = evaluate_boxes(pairs, crit);
  const bool have_masks = !o.pred_masks.empty() || !o.gt_masks.empty();
  if (have_masks) {
    if (o.pred_masks.empty() || o.gt_masks.empty())
      throw UsageError("--pred-masks and --gt-masks must be given together");
    open_input(o.pred_masks, "pred-masks");
    open_input(o.gt_masks, "gt-masks");
    const auto pm = read_mask_list(o.pred_masks);
    const auto gm = read_mask_list(o.gt_masks);
    std::vector<MaskPair> mp;
    for (const auto& g : gts) {
      auto pi = pm.find(g.id);
      auto gi = gm.find(g.id);
      if (pi == pm.end() || gi == gm.end()) {
        std::cerr << "no mask pair for '" << g.id << "'\n";
        missing.push_back(g.id);
        continue;
      }
      mp.push_back({pi->second, gi->second});
    }
    r.masks = mask_metrics(mp, GsdConfig{o.gsd}, centroid_of(o));
  }

  json config;
  config["input"] = o.input;
  config["gt"] = o.gt;
  config["criterion"] = to_string(crit);
  config["thr"] = thr;
  config["gsd"] = o.gsd;
  config["centroid"] = o.centroid;
  json report = header("eval", config);
  report["n"] = r.n;
  report["missing"] = missing;
  report["acc_at_thr"] = acc_at(pairs, thr, crit);
  report["acc25"] = r.acc25;
  report["acc50"] = r.acc50;
  report["acc75"] = r.acc75;
  report["masks"] = r.masks ? mask_metrics_json(*r.masks) : json(nullptr);
  emit_report(o, report);
  if (!o.json_stdout) {
    std::vector<std::pair<std::string, std::string>> rows{
        {"criterion", to_string(crit)}, {"n", std::to_string(r.n)},
        {"acc@" + fmt(thr), fmt(acc_at(pairs, thr, crit))}, {"acc25", fmt(r.acc25)},
        {"acc50", fmt(r.acc50)}, {"acc75", fmt(r.acc75)}};
    if (r.masks) {
      rows.push_back({"mIoU", fmt(r.masks->miou)});
      rows.push_back({"mDice", fmt(r.masks->mdice)});
      rows.push_back({"AAE (m^2)", fmt(r.masks->aae)});
      rows.push_back({"ME (m)", fmt(r.masks->me)});
    }
    print_table(rows);
  }
  return missing.empty() ? kExitOk : kExitFail;
}

int cmd_gap(const Options& o) {
  const double thr = o.thr.value_or(0.5);
  std::vector<BoxPair> pairs;
  json config;
  config["thr"] = thr;
  if (!o.input.empty() || !o.gt.empty()) {
    const auto gts = read_gt(o);
    const auto preds = read_pred(o);
    std::vector<std::string> missing;
    pairs = join_predictions(gts, preds, missing);
    for (const auto& id : missing) std::cerr << "no prediction for '" << id << "'\n";
    if (!missing.empty()) return kExitFail;
    config["source"] = "files";
    config["input"] = o.input;
    config["gt"] = o.gt;
  } else {
    // Synthetic: rotated ground truths, predictions are their hulls.
    SynthConfig c = synth_config(o);
    if (!c.rotated_fraction) c.rotated_fraction = 1.0;
    pairs.resize(o.seeds);
    parallel_for(o.seeds, o.workers, [&](std::size_t n) {
      const RBoxd gt = batch_scene(o.seed, n, c).gt_rbox;
      pairs[n] = {hbox_to_rbox(rbox_to_hbox(gt)), gt};
    });
    config["source"] = "synthetic-hulls";
    config["seed"] = o.seed;
    config["seeds"] = o.seeds;
    config["synth"] = synth_config_json(c);
  }
  const GapReport g = criterion_gap(pairs, thr);
  json report = header("gap", config);
  report["n"] = g.n;
  report["acc_hbox"] = g.acc_hbox;
  report["acc_rbox"] = g.acc_rbox;
  report["gap"] = g.gap;
  emit_report(o, report);
  if (!o.json_stdout)
    print_table({{"n", std::to_string(g.n)},
                 {"acc_hbox@" + fmt(thr), fmt(g.acc_hbox)},
                 {"acc_rbox@" + fmt(thr), fmt(g.acc_rbox)},
                 {"gap", fmt(g.gap)}});
  return kExitOk;
}

int cmd_stats(const Options& o) {
  const double thr = o.thr.value_or(1.0);
  auto in = open_input(o.input, "input");
  const auto records = read_records(in);
  std::vector<RBoxd> boxes;
  boxes.reserve(records.size());
  for (const auto& r : records) boxes.push_back(r.gt_rbox);
  const RotationStats s = rotation_stats(boxes, thr);
  json config;
  config["input"] = o.input;
  config["rot_thr_deg"] = thr;
  json report = header("stats", config);
  report["n"] = s.n;
  report["fraction_rotated"] = s.fraction_rotated;
  report["histogram_deg5"] = s.histogram;
  emit_report(o, report);
  if (!o.json_stdout) {
    std::vector<std::pair<std::string, std::string>> rows{
        {"n", std::to_string(s.n)}, {"rotated (|theta| > " + fmt(thr) + " deg)", fmt(s.fraction_rotated, 3)}};
    for (int b = 0; b < kRotationBins; ++b)
      rows.push_back({"[" + std::to_string(5 * b) + "," + std::to_string(5 * b + 5) + ")",
                      std::to_string(s.histogram[static_cast<std::size_t>(b)])});
    print_table(rows);
  }
  return kExitOk;
}

// A random pred/gt pair away from the non-smooth set of os_loss.
std::pair<RBoxd, RBoxd> smooth_tuple(CounterRng& rng) {
  for (;;) {
    const RBoxd gt{rng.uniform(40, 60), rng.uniform(40, 60), rng.uniform(10, 40), rng.uniform(10, 40),
                   rng.uniform(-std::numbers::pi / 2, std::numbers::pi / 2)};
    const RBoxd pred = normalized(RBoxd{gt.cx + rng.uniform(-8, 8), gt.cy + rng.uniform(-8, 8),
                                        gt.w * rng.uniform(0.7, 1.4), gt.h * rng.uniform(0.7, 1.4),
                                        gt.theta + rng.uniform(-1.2, 1.2)});
    if (center_distance(pred, gt) < 0.5) continue;
    if (std::abs(std::sin(pred.theta - gt.theta)) < 0.05) continue;
    const double iou = rbox_iou(pred, gt);
    if (iou < 0.05 || iou > 0.98) continue;
    return {pred, gt};
  }
}

int cmd_gradcheck(const Options& o) {
  const OSLossParams p = loss_params(o);
  constexpr double kAbsTol = 1e-4;
  constexpr double kRelTol = 0.02;
  struct Row {
    double max_abs{0};
    double max_rel{0};
    bool ok{true};
  };
  std::vector<Row> rows(o.seeds);
  parallel_for(o.seeds, o.workers, [&](std::size_t n) {
    CounterRng rng(o.seed + n, 7);
    const auto [pred, gt] = smooth_tuple(rng);
    const BoxVector analytic = os_loss_grad(pred, gt, p).grad;
    const BoxVector numeric =
        central_difference([&](const RBoxd& b) { return os_loss(b, gt, p); }, pred, iou_fd_steps(pred));
    Row r;
    for (int c = 0; c < 5; ++c) {
      const double err = std::abs(analytic[c] - numeric[c]);
      r.max_abs = std::max(r.max_abs, err);
      r.max_rel = std::max(r.max_rel, err / std::max(std::abs(numeric[c]), 1e-12));
      if (err > std::max(kAbsTol, kRelTol * std::abs(numeric[c]))) r.ok = false;
    }
    rows[n] = r;
  });
  std::size_t failures = 0;
  double max_abs = 0;
  double max_rel_tol = 0;  // relative error over components outside the absolute floor
  for (const auto& r : rows) {
    failures += r.ok ? 0 : 1;
    max_abs = std::max(max_abs, r.max_abs);
    if (r.max_abs > kAbsTol) max_rel_tol = std::max(max_rel_tol, r.max_rel);
  }
  json config;
  config["seed"] = o.seed;
  config["seeds"] = o.seeds;
  config["alpha"] = p.alpha;
  config["beta"] = p.beta;
  config["iou_form"] = o.iou_form;
  config["distance_mode"] = o.distance_mode;
  config["abs_tol"] = kAbsTol;
  config["rel_tol"] = kRelTol;
  json report = header("gradcheck", config);
  report["tuples"] = o.seeds;
  report["failures"] = failures;
  report["max_abs_error"] = max_abs;
  report["max_rel_error"] = max_rel_tol;
  report["ok"] = failures == 0;
  emit_report(o, report);
  if (!o.json_stdout)
    print_table({{"tuples", std::to_string(o.seeds)},
                 {"max abs error", fmt(max_abs)},
                 {"max rel error (above abs floor)", fmt(max_rel_tol)},
                 {"failures", std::to_string(failures)},
                 {"status", status_text(failures == 0)}});
  return failures == 0 ? kExitOk : kExitFail;
}

std::string loss_svg(const std::vector<FitStep>& t) {
  constexpr double W = 640;
  constexpr double H = 400;
  constexpr double M = 50;
  double lo = t.front().loss;
  double hi = t.front().loss;
  for (const auto& s : t) {
    lo = std::min(lo, s.loss);
    hi = std::max(hi, s.loss);
  }
  if (hi - lo < 1e-12) hi = lo + 1;
  const double span = static_cast<double>(std::max<std::size_t>(t.size() - 1, 1));
  std::ostringstream s;
  s << std::setprecision(6);
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<line x1=\"" << M << "\" y1=\"" << H - M << "\" x2=\"" << W - M << "\" y2=\"" << H - M
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << M << "\" y1=\"" << M << "\" x2=\"" << M << "\" y2=\"" << H - M << "\" stroke=\"black\"/>\n";
  s << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
  for (std::size_t n = 0; n < t.size(); ++n) {
    const double x = M + (W - 2 * M) * static_cast<double>(n) / span;
    const double y = H - M - (H - 2 * M) * (t[n].loss - lo) / (hi - lo);
    s << x << ',' << y << ' ';
  }
  s << "\"/>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"13\">step</text>\n";
  s << "<text x=\"14\" y=\"" << H / 2 << "\" font-size=\"13\" transform=\"rotate(-90 14 " << H / 2
    << ")\" text-anchor=\"middle\">loss</text>\n";
  s << "<text x=\"" << M << "\" y=\"" << M - 8 << "\" font-size=\"11\">" << hi << "</text>\n";
  s << "<text x=\"" << M << "\" y=\"" << H - M + 14 << "\" font-size=\"11\">" << lo << "</text>\n";
  s << "<text x=\"" << W - M << "\" y=\"" << H - M + 14 << "\" font-size=\"11\" text-anchor=\"end\">"
    << t.size() - 1 << "</text>\n";
  s << "</svg>\n";
  return s.str();
}

int cmd_fitbox(const Options& o) {
  const OSLossParams p = loss_params(o);
  RBoxd gt;
  RBoxd init;
  if (!o.gt_box.empty() || !o.init.empty()) {
    if (o.gt_box.empty() || o.init.empty()) throw UsageError("--gt-box and --init must be given together");
    gt = parse_box(o.gt_box, "gt-box");
    init = parse_box(o.init, "init");
  } else {
    CounterRng rng(o.seed, 11);
    gt = {rng.uniform(80, 120), rng.uniform(80, 120), rng.uniform(20, 60), rng.uniform(20, 60),
          rng.uniform(-std::numbers::pi / 2, std::numbers::pi / 2)};
    init = normalized(RBoxd{gt.cx + rng.uniform(-10, 10), gt.cy + rng.uniform(-10, 10), gt.w * rng.uniform(0.8, 1.25),
                            gt.h * rng.uniform(0.8, 1.25), gt.theta + rng.uniform(-0.5, 0.5)});
  }
  if (o.steps < 0) throw UsageError("--steps must be >= 0");
  if (!(o.lr > 0)) throw UsageError("--lr must be positive");
  const FitResult r = fit_rbox(init, gt, p, o.lr, o.steps);

  std::string lines;
  for (std::size_t n = 0; n < r.trajectory.size(); ++n) {
    json j;
    j["step"] = n;
    const json box = box_json(r.trajectory[n].box);
    for (const auto& [k, v] : box.items()) j[k] = v;
    j["loss"] = r.trajectory[n].loss;
    lines += j.dump() + "\n";
  }
  if (!o.output.empty()) write_text(o.output, lines);
  if (!o.plot.empty()) write_text(o.plot, loss_svg(r.trajectory));

  const RBoxd& last = r.trajectory.back().box;
  const double center_err = center_distance(last, gt);
  const double sin_err = std::abs(std::sin(last.theta - gt.theta));
  if (o.json_stdout) {
    json config;
    config["seed"] = o.seed;
    config["alpha"] = p.alpha;
    config["beta"] = p.beta;
    config["lr"] = o.lr;
    config["steps"] = o.steps;
    json report = header("fitbox", config);
    report["gt"] = box_json(gt);
    report["init"] = box_json(init);
    report["final"] = box_json(last);
    report["final_loss"] = r.trajectory.back().loss;
    report["center_error"] = center_err;
    report["sin_angle_error"] = sin_err;
    report["diverged"] = r.diverged;
    std::cout << report.dump(2) << '\n';
  } else {
    print_table({{"steps run", std::to_string(r.trajectory.size() - 1)},
                 {"initial loss", fmt(r.trajectory.front().loss)},
                 {"final loss", fmt(r.trajectory.back().loss)},
                 {"center error (px)", fmt(center_err)},
                 {"|sin dtheta|", fmt(sin_err)},
                 {"status", r.diverged ? status_text(false) + " " + r.diagnostic : status_text(true)}});
  }
  if (r.diverged) std::cerr << "fit_rbox diverged: " << r.diagnostic << '\n';
  return r.diverged ? kExitFail : kExitOk;
}

int cmd_pipeline(const Options& o) {
  PipelineConfig c;
  c.synth = synth_config(o);
  c.eps = o.eps;
  c.ranges = o.ranges == "fcos" ? ScaleRanges::fcos_default() : ScaleRanges::containment();
  c.decode.multi_output = o.multi_output;
  c.decode.nms_thr = o.nms_thr;
  c.decode.score_floor = o.score_floor;
  c.weights = {o.mu1, o.mu2, o.mu3};
  c.loss = loss_params(o);
  c.criterion = criterion_of(o);
  c.gsd.meters_per_pixel = o.gsd;
  c.centroid = centroid_of(o);
  const double thr = o.thr.value_or(0.5);

  const PipelineReport r = run_pipeline(o.seed, o.seeds, c, o.workers);
  std::vector<BoxPair> pairs;
  for (const auto& s : r.scenes) pairs.push_back({s.prediction.box, s.gt});

  if (!o.predictions.empty()) {
    std::string lines;
    for (const auto& s : r.scenes)
      lines += to_json(PredictionRecord{scene_id(s.seed), s.prediction.box, s.prediction.score}).dump() + "\n";
    write_text(o.predictions, lines);
  }
  if (!o.prompts.empty()) {
    const PromptMode mode = o.prompt_mode == "rbox-corners" ? PromptMode::rbox_corners : PromptMode::hbox;
    std::string lines;
    for (const auto& s : r.scenes) lines += to_json_line(export_sam_prompt(s.prediction, mode, scene_id(s.seed))) + "\n";
    write_text(o.prompts, lines);
  }

  json config;
  config["seed"] = o.seed;
  config["seeds"] = o.seeds;
  config["synth"] = synth_config_json(c.synth);
  config["eps"] = c.eps;
  config["ranges"] = o.ranges;
  config["head"] = {{"log_extent_sigma", c.head.log_extent_sigma},
                    {"theta_sigma", c.head.theta_sigma},
                    {"negative_centerness", c.head.negative_centerness},
                    {"negative_box_scale", c.head.negative_box_scale}};
  config["mu1"] = o.mu1;
  config["mu2"] = o.mu2;
  config["mu3"] = o.mu3;
  config["alpha"] = c.loss.alpha;
  config["beta"] = c.loss.beta;
  config["iou_form"] = o.iou_form;
  config["distance_mode"] = o.distance_mode;
  config["multi_output"] = c.decode.multi_output;
  config["nms_thr"] = c.decode.nms_thr;
  config["score_floor"] = c.decode.score_floor;
  config["criterion"] = to_string(c.criterion);
  config["thr"] = thr;
  config["gsd"] = o.gsd;
  config["centroid"] = o.centroid;
  json report = header("pipeline", config);
  report["n"] = r.eval.n;
  report["acc_at_thr"] = acc_at(pairs, thr, c.criterion);
  report["acc25"] = r.eval.acc25;
  report["acc50"] = r.eval.acc50;
  report["acc75"] = r.eval.acc75;
  report["masks"] = r.eval.masks ? mask_metrics_json(*r.eval.masks) : json(nullptr);
  report["mean_loss"] = {{"classification", r.mean_loss.classification},
                         {"centerness", r.mean_loss.centerness},
                         {"regression", r.mean_loss.regression},
                         {"total", r.mean_loss.total}};
  json scenes = json::array();
  for (const auto& s : r.scenes) {
    json j;
    j["id"] = scene_id(s.seed);
    j["iou"] = s.iou;
    j["score"] = s.prediction.score;
    j["level"] = s.prediction.level;
    j["n_positive"] = s.n_positive;
    j["pred"] = box_json(s.prediction.box);
    j["gt"] = box_json(s.gt);
    scenes.push_back(j);
  }
  report["scenes"] = scenes;
  emit_report(o, report);
  if (!o.json_stdout) {
    std::vector<std::pair<std::string, std::string>> rows{
        {"scenes", std::to_string(r.eval.n)}, {"criterion", to_string(c.criterion)},
        {"acc25", fmt(r.eval.acc25)},         {"acc50", fmt(r.eval.acc50)},
        {"acc75", fmt(r.eval.acc75)}};
    if (r.eval.masks) {
      rows.push_back({"mIoU", fmt(r.eval.masks->miou)});
      rows.push_back({"mDice", fmt(r.eval.masks->mdice)});
      rows.push_back({"AAE (m^2)", fmt(r.eval.masks->aae)});
      rows.push_back({"ME (m)", fmt(r.eval.masks->me)});
    }
    print_table(rows);
  }
  return kExitOk;
}

// -- option wiring -----------------------------------------------------------------

void add_io(CLI::App* c, Options& o) {
  c->add_option("--input", o.input, "Input file");
  c->add_option("--output", o.output, "Output path");
  c->add_flag("--json", o.json_stdout, "Print the JSON report on stdout instead of the table");
}

void add_seeds(CLI::App* c, Options& o) {
  c->add_option("--seed", o.seed, "First seed");
  c->add_option("--seeds", o.seeds, "Number of seeded instances");
  c->add_option("--workers", o.workers, "Worker threads (results do not depend on it)")->check(CLI::Range(1, 256));
}

void add_synth(CLI::App* c, Options& o) {
  c->add_option("--noise", o.noise, "Feature noise level")->check(CLI::NonNegativeNumber);
  c->add_option("--rotated-fraction", o.rotated_fraction, "Plant exactly this fraction of rotated instances")
      ->check(CLI::Range(0.0, 1.0));
}

void add_loss(CLI::App* c, Options& o) {
  c->add_option("--alpha", o.alpha, "Distance-term weight")->check(CLI::NonNegativeNumber);
  c->add_option("--beta", o.beta, "Angle-term weight")->check(CLI::NonNegativeNumber);
  c->add_option("--iou-form", o.iou_form, "IoU loss form")->check(CLI::IsMember({"linear", "log"}));
  c->add_option("--distance-mode", o.distance_mode, "Distance term")->check(CLI::IsMember({"sigmoid", "centered"}));
}

void add_eval(CLI::App* c, Options& o) {
  c->add_option("--criterion", o.criterion, "Overlap criterion")->check(CLI::IsMember({"rbox", "hbox"}));
  c->add_option("--gsd", o.gsd, "Ground sample distance (m/px)")->check(CLI::PositiveNumber);
  c->add_option("--centroid", o.centroid, "Mask centroid")->check(CLI::IsMember({"pixel-mean", "box-center"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rboxgeo: rotated-box geo-localization toolkit"};
  app.require_subcommand(1);
  Options o;
  std::map<CLI::App*, int (*)(const Options&)> handlers;

  auto* validate_cmd = app.add_subcommand("validate", "Check an annotation JSONL file");
  add_io(validate_cmd, o);
  handlers[validate_cmd] = cmd_validate;

  auto* convert_cmd = app.add_subcommand("convert", "Fill gt_hbox with the hull of each gt_rbox");
  add_io(convert_cmd, o);
  handlers[convert_cmd] = cmd_convert;

  auto* synth_cmd = app.add_subcommand("synth", "Write a seeded batch of synthetic scenes");
  add_io(synth_cmd, o);
  add_seeds(synth_cmd, o);
  add_synth(synth_cmd, o);
  synth_cmd->add_flag("--no-pyramids", o.no_pyramids, "Skip the feature pyramid containers");
  handlers[synth_cmd] = cmd_synth;

  auto* clickmap_cmd = app.add_subcommand("clickmap", "Write the click representation map as PFM");
  add_io(clickmap_cmd, o);
  clickmap_cmd->add_option("--height", o.height, "Image height");
  clickmap_cmd->add_option("--width", o.width, "Image width");
  clickmap_cmd->add_option("--click-x", o.click_x, "Click column");
  clickmap_cmd->add_option("--click-y", o.click_y, "Click row");
  handlers[clickmap_cmd] = cmd_clickmap;

  auto* eval_cmd = app.add_subcommand("eval", "Accuracy and mask metrics for predictions");
  add_io(eval_cmd, o);
  add_eval(eval_cmd, o);
  eval_cmd->add_option("--gt", o.gt, "Annotation JSONL");
  eval_cmd->add_option("--thr", o.thr, "IoU threshold for acc_at_thr")->check(CLI::Range(0.0, 1.0));
  eval_cmd->add_option("--pred-masks", o.pred_masks, "Predicted mask list (JSONL)");
  eval_cmd->add_option("--gt-masks", o.gt_masks, "Ground-truth mask list (JSONL)");
  handlers[eval_cmd] = cmd_eval;

  auto* gap_cmd = app.add_subcommand("gap", "HBox vs RBox criterion gap");
  add_io(gap_cmd, o);
  add_seeds(gap_cmd, o);
  add_synth(gap_cmd, o);
  gap_cmd->add_option("--gt", o.gt, "Annotation JSONL (with --input predictions)");
  gap_cmd->add_option("--thr", o.thr, "IoU threshold")->check(CLI::Range(0.0, 1.0));
  handlers[gap_cmd] = cmd_gap;

  auto* stats_cmd = app.add_subcommand("stats", "Rotation statistics of annotations");
  add_io(stats_cmd, o);
  stats_cmd->add_option("--thr", o.thr, "Rotation threshold in degrees")->check(CLI::Range(0.0, 90.0));
  handlers[stats_cmd] = cmd_stats;

  auto* grad_cmd = app.add_subcommand("gradcheck", "Analytic vs finite-difference loss gradients");
  add_io(grad_cmd, o);
  add_seeds(grad_cmd, o);
  add_loss(grad_cmd, o);
  handlers[grad_cmd] = cmd_gradcheck;

  auto* fit_cmd = app.add_subcommand("fitbox", "Fit a box to a target by descending the loss");
  add_io(fit_cmd, o);
  add_loss(fit_cmd, o);
  fit_cmd->add_option("--seed", o.seed, "Seed for a random target and start");
  fit_cmd->add_option("--gt-box", o.gt_box, "Target box cx,cy,w,h,theta_deg");
  fit_cmd->add_option("--init", o.init, "Start box cx,cy,w,h,theta_deg");
  fit_cmd->add_option("--steps", o.steps, "Maximum steps");
  fit_cmd->add_option("--lr", o.lr, "Step cap");
  fit_cmd->add_option("--plot", o.plot, "SVG plot of loss vs step");
  handlers[fit_cmd] = cmd_fitbox;

  auto* pipe_cmd = app.add_subcommand("pipeline", "Synthetic end-to-end run with a simulated head");
  add_io(pipe_cmd, o);
  add_seeds(pipe_cmd, o);
  add_synth(pipe_cmd, o);
  add_eval(pipe_cmd, o);
  add_loss(pipe_cmd, o);
  pipe_cmd->add_option("--mu1", o.mu1, "Classification loss weight")->check(CLI::NonNegativeNumber);
  pipe_cmd->add_option("--mu2", o.mu2, "Centerness loss weight")->check(CLI::NonNegativeNumber);
  pipe_cmd->add_option("--mu3", o.mu3, "Regression loss weight")->check(CLI::NonNegativeNumber);
  pipe_cmd->add_option("--eps", o.eps, "Attention normalisation epsilon")->check(CLI::PositiveNumber);
  pipe_cmd->add_option("--thr", o.thr, "IoU threshold for acc_at_thr")->check(CLI::Range(0.0, 1.0));
  pipe_cmd->add_option("--ranges", o.ranges, "Scale ranges")->check(CLI::IsMember({"containment", "fcos"}));
  pipe_cmd->add_option("--nms-thr", o.nms_thr, "Rotated NMS IoU threshold")->check(CLI::Range(0.0, 1.0));
  pipe_cmd->add_option("--score-floor", o.score_floor, "Minimum fused score")->check(CLI::Range(0.0, 1.0));
  pipe_cmd->add_flag("--multi-output", o.multi_output, "Keep all predictions after NMS");
  pipe_cmd->add_option("--predictions", o.predictions, "Write top-1 predictions JSONL");
  pipe_cmd->add_option("--prompts", o.prompts, "Write segmentation prompts JSONL");
  pipe_cmd->add_option("--prompt-mode", o.prompt_mode, "Prompt box form")
      ->check(CLI::IsMember({"hbox", "rbox-corners"}));
  handlers[pipe_cmd] = cmd_pipeline;

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  for (const auto& [cmd, handler] : handlers) {
    if (!cmd->parsed()) continue;
    try {
      return handler(o);
    } catch (const UsageError& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kExitUsage;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kExitFail;
    }
  }
  std::cerr << app.help();
  return kExitUsage;
}
