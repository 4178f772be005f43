#include "rboxgeo/dataset.hpp"

#include <cmath>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>

namespace rboxgeo {

using nlohmann::json;
using nlohmann::ordered_json;

const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

const char* to_string(View v) { return v == View::drone ? "drone" : "ground"; }

namespace {

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw RecordError("bad-enum", "unknown split '" + s + "'");
}

View parse_view(const std::string& s) {
  if (s == "drone") return View::drone;
  if (s == "ground") return View::ground;
  throw RecordError("bad-enum", "unknown view '" + s + "'");
}

const json& field(const json& j, const char* name) {
  const auto it = j.find(name);
  if (it == j.end()) throw RecordError("missing-field", std::string("missing field '") + name + "'");
  return *it;
}

double number(const json& j, const char* name) {
  const json& v = field(j, name);
  if (!v.is_number()) throw RecordError("missing-field", std::string("field '") + name + "' is not a number");
  return v.get<double>();
}

std::string text(const json& j, const char* name) {
  const json& v = field(j, name);
  if (!v.is_string()) throw RecordError("missing-field", std::string("field '") + name + "' is not a string");
  return v.get<std::string>();
}

const json& object(const json& j, const char* name) {
  const json& v = field(j, name);
  if (!v.is_object()) throw RecordError("missing-field", std::string("field '") + name + "' is not an object");
  return v;
}

RBoxd rbox_from_json(const json& b) {
  return {number(b, "cx"), number(b, "cy"), number(b, "w"), number(b, "h"),
          degrees_to_radians(number(b, "theta"))};
}

ordered_json rbox_to_json(const RBoxd& b) {
  ordered_json j;
  j["cx"] = b.cx;
  j["cy"] = b.cy;
  j["w"] = b.w;
  j["h"] = b.h;
  j["theta"] = radians_to_degrees(b.theta);
  return j;
}

json parse_line(const std::string& line, std::size_t lineno) {
  try {
    return json::parse(line);
  } catch (const json::parse_error& e) {
    throw RecordError("parse-error", "line " + std::to_string(lineno) + ": " + e.what());
  }
}

bool blank(const std::string& s) { return s.find_first_not_of(" \t\r\n") == std::string::npos; }

}  // namespace

double degrees_to_radians(double deg) { return deg * std::numbers::pi / 180.0; }

double radians_to_degrees(double rad) {
  const double deg = rad * 180.0 / std::numbers::pi;
  if (!std::isfinite(deg)) return deg;
  const double r = std::round(deg * 1e10) / 1e10;
  return r == 0 ? 0.0 : r;
}

AnnotationRecord record_from_json(const json& j) {
  if (!j.is_object()) throw RecordError("parse-error", "record is not a JSON object");
  AnnotationRecord r;
  r.id = text(j, "id");
  r.query_image = text(j, "query_image");
  r.reference_image = text(j, "reference_image");
  const json& click = object(j, "click");
  r.click = {number(click, "x"), number(click, "y")};
  if (j.contains("query_size")) {
    const json& qs = object(j, "query_size");
    r.query_size = ImagePlane{static_cast<int>(number(qs, "h")), static_cast<int>(number(qs, "w"))};
  }
  r.gt_rbox = rbox_from_json(object(j, "gt_rbox"));
  if (j.contains("gt_hbox") && !j.at("gt_hbox").is_null()) {
    const json& hb = object(j, "gt_hbox");
    r.gt_hbox = HBoxd{number(hb, "xmin"), number(hb, "ymin"), number(hb, "xmax"), number(hb, "ymax")};
  }
  r.split = parse_split(text(j, "split"));
  r.view = parse_view(text(j, "view"));
  return r;
}

ordered_json to_json(const AnnotationRecord& r) {
  ordered_json j;
  j["id"] = r.id;
  j["query_image"] = r.query_image;
  j["reference_image"] = r.reference_image;
  j["click"] = ordered_json{{"x", r.click.x}, {"y", r.click.y}};
  if (r.query_size) j["query_size"] = ordered_json{{"h", r.query_size->h}, {"w", r.query_size->w}};
  j["gt_rbox"] = rbox_to_json(r.gt_rbox);
  if (r.gt_hbox) {
    j["gt_hbox"] = ordered_json{{"xmin", r.gt_hbox->xmin},
                                {"ymin", r.gt_hbox->ymin},
                                {"xmax", r.gt_hbox->xmax},
                                {"ymax", r.gt_hbox->ymax}};
  }
  j["split"] = to_string(r.split);
  j["view"] = to_string(r.view);
  return j;
}

std::string to_jsonl_line(const AnnotationRecord& r) { return to_json(r).dump(); }

PredictionRecord prediction_from_json(const json& j) {
  if (!j.is_object()) throw RecordError("parse-error", "prediction is not a JSON object");
  PredictionRecord p;
  p.id = text(j, "id");
  p.rbox = rbox_from_json(object(j, "rbox"));
  if (j.contains("score")) p.score = number(j, "score");
  return p;
}

ordered_json to_json(const PredictionRecord& p) {
  ordered_json j;
  j["id"] = p.id;
  j["rbox"] = rbox_to_json(p.rbox);
  j["score"] = p.score;
  return j;
}

std::vector<AnnotationRecord> read_records(std::istream& in) {
  std::vector<AnnotationRecord> out;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (blank(line)) continue;
    try {
      out.push_back(record_from_json(parse_line(line, n)));
    } catch (const RecordError& e) {
      throw RecordError(e.rule(), "line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

std::vector<PredictionRecord> read_predictions(std::istream& in) {
  std::vector<PredictionRecord> out;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (blank(line)) continue;
    try {
      out.push_back(prediction_from_json(parse_line(line, n)));
    } catch (const RecordError& e) {
      throw RecordError(e.rule(), "line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

void write_records(std::ostream& out, const std::vector<AnnotationRecord>& records) {
  for (const auto& r : records) out << to_jsonl_line(r) << '\n';
}

std::vector<Violation> check_record(const AnnotationRecord& r, std::size_t line) {
  std::vector<Violation> out;
  const auto flag = [&](const char* rule, std::string detail) {
    out.push_back({line, r.id, rule, std::move(detail)});
  };
  const RBoxd& b = r.gt_rbox;
  if (r.id.empty()) flag("empty-id", "record id is empty");

  const bool finite = std::isfinite(b.cx) && std::isfinite(b.cy) && std::isfinite(b.w) &&
                      std::isfinite(b.h) && std::isfinite(b.theta) && std::isfinite(r.click.x) &&
                      std::isfinite(r.click.y);
  if (!finite) {
    flag("nonfinite-value", "record holds a non-finite number");
    return out;
  }
  if (!(b.w > 0 && b.h > 0)) flag("nonpositive-extent", "gt_rbox width and height must be positive");
  const double deg = radians_to_degrees(b.theta);
  if (!(deg >= -90.0 && deg < 90.0)) flag("angle-out-of-range", "gt_rbox theta must lie in [-90, 90) degrees");
  if (r.query_size) {
    if (r.query_size->h < 1 || r.query_size->w < 1)
      flag("bad-query-size", "query_size must be positive");
    else if (!click_in_plane(*r.query_size, r.click))
      flag("click-out-of-bounds", "click lies outside the query image");
  }
  if (r.gt_hbox) {
    if (!is_valid(*r.gt_hbox)) {
      flag("hbox-inverted", "gt_hbox must satisfy xmin < xmax and ymin < ymax");
    } else if (is_valid(b)) {
      const HBoxd hull = rbox_to_hbox(b);
      const HBoxd& g = *r.gt_hbox;
      constexpr double tol = 1.0;
      if (g.xmin > hull.xmin + tol || g.ymin > hull.ymin + tol || g.xmax < hull.xmax - tol ||
          g.ymax < hull.ymax - tol)
        flag("hbox-hull-mismatch", "gt_hbox does not contain the hull of gt_rbox");
    }
  }
  return out;
}

ValidationReport validate(std::istream& in) {
  ValidationReport report;
  std::set<std::string> seen;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (blank(line)) continue;
    ++report.records;
    json j;
    try {
      j = parse_line(line, n);
    } catch (const RecordError& e) {
      report.violations.push_back({n, "", e.rule(), e.what()});
      continue;
    }
    AnnotationRecord rec;
    try {
      rec = record_from_json(j);
    } catch (const RecordError& e) {
      std::string id;
      if (j.is_object() && j.contains("id") && j["id"].is_string()) id = j["id"].get<std::string>();
      report.violations.push_back({n, id, e.rule(), e.what()});
      continue;
    }
    auto v = check_record(rec, n);
    report.violations.insert(report.violations.end(), v.begin(), v.end());
    if (!rec.id.empty() && !seen.insert(rec.id).second)
      report.violations.push_back({n, rec.id, "duplicate-id", "id already used by an earlier record"});
  }
  return report;
}

AnnotationRecord hbox_from_rbox_record(const AnnotationRecord& r) {
  AnnotationRecord out = r;
  out.gt_hbox = rbox_to_hbox(r.gt_rbox);
  return out;
}

CostSummary cost_summary(const CostLedger& ledger) {
  if (ledger.entries.empty()) throw std::domain_error("cost_summary: empty ledger");
  std::map<std::string, std::vector<double>> by_type;
  for (const auto& e : ledger.entries) {
    if (!(e.seconds >= 0) || !std::isfinite(e.seconds))
      throw std::invalid_argument("cost_summary: negative or non-finite duration");
    by_type[e.type].push_back(e.seconds);
  }
  CostSummary out;
  for (const auto& [type, xs] : by_type) {
    double acc = 0;
    for (double x : xs) acc += x;
    out.mean_seconds.emplace_back(type, acc / static_cast<double>(xs.size()));
  }
  for (const auto& [a, ma] : out.mean_seconds)
    for (const auto& [b, mb] : out.mean_seconds)
      if (a != b && mb > 0) out.ratios.push_back({a, b, ma / mb});
  return out;
}

}  // namespace rboxgeo
