#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "ssod/detection.hpp"
#include "ssod/metrics.hpp"
#include "ssod/pipeline.hpp"
#include "ssod/sat.hpp"

namespace ssod::io {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// DOTA annotations

struct DotaRecord {
    QuadPolygon quad;
    RotatedBox box;
    std::string category;
    bool difficult = false;
    std::size_t line = 0;  ///< 1-based
};

struct DotaParseError {
    std::size_t line = 0;
    std::string message;
};

struct DotaParseResult {
    std::vector<DotaRecord> records;
    std::vector<DotaParseError> errors;
};

/// Parses "x1 y1 x2 y2 x3 y3 x4 y4 category difficult" lines. Leading
/// "imagesource:" / "gsd:" header lines and blank lines are skipped. A
/// malformed line is reported with its line number and does not affect the
/// others.
DotaParseResult parse_dota(std::string_view text);

// ---------------------------------------------------------------------------
// Detection records (JSON lines). Angles are radians.

struct DetectionRecord {
    std::string image_id;
    RotatedBox box;
    std::string class_name;
    double score = 1.0;
    std::optional<double> bg_score;
    std::optional<bool> difficult;
};

/// Throws SchemaError naming the offending field, e.g. "score: ...".
DetectionRecord record_from_json(const Json& j);
Json record_to_json(const DetectionRecord& r);

/// One record per non-blank line. Errors are prefixed with "line N: ".
std::vector<DetectionRecord> read_detection_records(std::istream& in);
std::vector<DetectionRecord> read_detection_records_file(const std::string& path);
void write_detection_records(std::ostream& out, std::span<const DetectionRecord> records);
void write_detection_records_file(const std::string& path, std::span<const DetectionRecord> records);

/// Interns image ids and class names into the integer indices carried by
/// Detection. Indices follow first appearance.
class NameTable {
public:
    int intern(const std::string& name);
    std::optional<int> find(const std::string& name) const;
    const std::string& name(int index) const { return names_.at(static_cast<std::size_t>(index)); }
    std::size_t size() const { return names_.size(); }

private:
    std::vector<std::string> names_;
    std::map<std::string, int> index_;
};

/// Default class names "class-00", "class-01", ... for simulated data.
NameTable default_class_table(int num_classes);
std::string scene_image_id(std::size_t index);

Detection to_detection(const DetectionRecord& r, NameTable& images, NameTable& classes);
DetectionRecord to_record(const Detection& d, const NameTable& images, const NameTable& classes);

// ---------------------------------------------------------------------------
// Configuration

/// Missing keys take their defaults; unknown keys are rejected with the
/// dotted path of the key. The result is validated.
RunConfig run_config_from_json(const Json& j);
Json run_config_to_json(const RunConfig& config);

/// Reads `path` or, when empty, the file named by SSOD_CONFIG; with neither
/// the defaults are returned.
RunConfig load_run_config(const std::string& path);

// ---------------------------------------------------------------------------
// Reports

Json to_json(const SatThresholds& t);
Json to_json(const EvalReport& report, const NameTable& classes);
Json to_json(const SizeMetrics& m);
Json to_json(const IterationRecord& record);

/// Pretty-printed with a trailing newline.
void write_json_file(const std::string& path, const Json& j);
Json read_json_file(const std::string& path);

}  // namespace ssod::io
