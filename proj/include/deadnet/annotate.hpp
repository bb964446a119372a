#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "deadnet/dataset.hpp"
#include "deadnet/stats.hpp"

namespace deadnet {

enum class Judgment { Healthy, Sick, Unsure };

std::string_view to_string(Judgment j);
Judgment parse_judgment(std::string_view text);

inline constexpr std::size_t kSequenceFrames = 10;
inline constexpr std::size_t kOverlapEvery = 5;
inline constexpr double kDefaultExportTrainFraction = 700.0 / 900.0;

struct AnnotationRecord {
    std::string annotator;
    std::string sequence_id;
    Judgment label = Judgment::Unsure;
    std::string timestamp;  // ISO 8601 UTC; filled in on append when empty
    std::size_t presentation = 0;

    friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

std::string to_json_line(const AnnotationRecord& r);
AnnotationRecord annotation_from_json(std::string_view line);

struct SequenceItem {
    std::string id;
    std::vector<std::string> frames;
    std::string stage_position;
    double light_dose = 0.0;
    std::size_t annotation_count = 0;
    std::set<std::string> scored_by;

    void validate() const;
};

// catalog: JSON-lines {"id", "stage_position", "light_dose", "frames": [10 paths]}
// frame paths are resolved against the catalog's directory when relative
std::vector<SequenceItem> read_catalog(const std::filesystem::path& path);
void write_catalog(const std::filesystem::path& path, const std::vector<SequenceItem>& items);

/// One served sequence, as written to the presentation log.
struct Presentation {
    std::string annotator;
    std::size_t index = 0;  // 1-based, per annotator
    std::string sequence_id;
    bool overlap = false;   // drawn from the pool scored by someone else
    bool fallback = false;  // overlap turn with an empty pool, drawn at random instead
};

struct ServiceConcordance {
    std::size_t overlaps = 0;       // scored by >= 2 annotators, no Unsure among them
    std::size_t disagreements = 0;  // of those, not unanimous
    std::size_t unsure_excluded = 0;
    std::optional<ConcordanceReport> chain;  // empty when there is nothing to report or d >= 0.5
    std::string note;
};

std::string to_json(const ServiceConcordance& c);

/// Concordance over raw records: a sequence counts once it has >= 2
/// judgments, none of them Unsure.
ServiceConcordance concordance_of(const std::vector<AnnotationRecord>& records);

/// Replays an annotation log file (complete lines only).
std::vector<AnnotationRecord> read_annotation_log(const std::filesystem::path& path);

enum class Ack { Appended, Duplicate };

/// The annotation campaign state. Two append-only JSON-lines logs live in
/// `dir`: annotations.jsonl and presentations.jsonl. Opening replays both;
/// a torn final line (no newline, or unparseable) is dropped and truncated.
class AnnotationStore {
public:
    AnnotationStore(std::filesystem::path dir, std::vector<SequenceItem> catalog, std::uint64_t seed = 0);

    /// Every 5th presentation to an annotator comes from the pool scored by
    /// someone else; the rest are uniform over what this annotator has not
    /// scored. Throws NotFoundError once nothing is left.
    SequenceItem next_sequence(const std::string& annotator, Presentation* served = nullptr);
    Ack record_annotation(AnnotationRecord record);

    ServiceConcordance concordance_report() const;

    /// Unanimous sequences expanded to 10 labeled frames each, split by stage
    /// position. Throws when nothing passes the filter.
    Split<ImageRecord> export_training_set(double train_fraction = kDefaultExportTrainFraction,
                                           std::uint64_t seed = 0) const;

    SequenceItem sequence(const std::string& id) const;
    std::vector<AnnotationRecord> annotations() const;
    std::vector<Presentation> presentations() const;
    std::size_t size() const { return catalog_.size(); }

    std::filesystem::path annotation_log() const { return dir_ / "annotations.jsonl"; }
    std::filesystem::path presentation_log() const { return dir_ / "presentations.jsonl"; }

    // test hook: runs after a record is durably appended and indexed, before
    // acknowledgment (a throw here models a crash mid-request)
    std::function<void(const AnnotationRecord&)> after_append;

private:
    void replay();
    void apply(const AnnotationRecord& r);
    SequenceItem item_locked(std::size_t i) const;

    std::filesystem::path dir_;
    std::vector<SequenceItem> catalog_;
    std::map<std::string, std::size_t> by_id_;
    std::uint64_t seed_;

    mutable std::shared_mutex mutex_;
    std::vector<AnnotationRecord> records_;
    std::map<std::pair<std::string, std::string>, std::size_t> by_key_;  // (annotator, sequence) -> record
    std::map<std::string, std::size_t> served_;                         // annotator -> presentations so far
    std::vector<Presentation> presentations_;
};

std::string split_manifest_json(const Split<ImageRecord>& split);

}  // namespace deadnet
