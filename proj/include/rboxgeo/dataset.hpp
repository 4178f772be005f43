// Annotation records (JSON Lines), validation, HBox derivation and
// annotation-cost accounting.
//
// On disk every angle is in degrees within [-90, 90); in memory radians.
#ifndef RBOXGEO_DATASET_HPP
#define RBOXGEO_DATASET_HPP

#include "rboxgeo/clickmap.hpp"
#include "rboxgeo/geometry.hpp"

#include <nlohmann/json.hpp>

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rboxgeo {

enum class Split { train, val, test };
enum class View { drone, ground };

const char* to_string(Split s);
const char* to_string(View v);

struct AnnotationRecord {
  std::string id;
  std::string query_image;
  std::string reference_image;
  ClickPoint<double> click;
  std::optional<ImagePlane> query_size;  // enables the click bounds check
  RBoxd gt_rbox;
  std::optional<HBoxd> gt_hbox;
  Split split{Split::train};
  View view{View::drone};
};

/// A single predicted box for the record with the same id.
struct PredictionRecord {
  std::string id;
  RBoxd rbox;
  double score{1.0};
};

/// Malformed JSON content; `rule` names the schema rule that failed.
class RecordError : public std::runtime_error {
 public:
  RecordError(std::string rule, const std::string& what)
      : std::runtime_error(what), rule_(std::move(rule)) {}
  const std::string& rule() const { return rule_; }

 private:
  std::string rule_;
};

double degrees_to_radians(double deg);
/// Rounded to 1e-10 degrees so that a parse/serialise cycle is stable.
double radians_to_degrees(double rad);

AnnotationRecord record_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const AnnotationRecord& r);
std::string to_jsonl_line(const AnnotationRecord& r);

PredictionRecord prediction_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const PredictionRecord& p);

/// Strict readers: the first bad line throws RecordError naming the line.
std::vector<AnnotationRecord> read_records(std::istream& in);
std::vector<PredictionRecord> read_predictions(std::istream& in);
void write_records(std::ostream& out, const std::vector<AnnotationRecord>& records);

struct Violation {
  std::size_t line{0};  // 1-based
  std::string id;
  std::string rule;
  std::string detail;
};

struct ValidationReport {
  std::size_t records{0};
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

/// Rule checks on one parsed record.
std::vector<Violation> check_record(const AnnotationRecord& r, std::size_t line = 0);

/// Reads every line; unparseable lines are reported and skipped.
ValidationReport validate(std::istream& in);

AnnotationRecord hbox_from_rbox_record(const AnnotationRecord& r);

// -- Annotation cost -----------------------------------------------------------

struct CostEntry {
  std::string record_id;
  std::string type;  // e.g. "rbox", "hbox", "mask"
  double seconds{0};
};

struct CostLedger {
  std::vector<CostEntry> entries;
};

struct CostRatio {
  std::string numerator;
  std::string denominator;
  double ratio{0};
};

struct CostSummary {
  std::vector<std::pair<std::string, double>> mean_seconds;  // sorted by type
  std::vector<CostRatio> ratios;                             // every ordered pair of types
};

CostSummary cost_summary(const CostLedger& ledger);

}  // namespace rboxgeo

#endif  // RBOXGEO_DATASET_HPP
