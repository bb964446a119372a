#include "deadnet/annotate.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <random>
#include <sstream>

#include "deadnet/random.hpp"
#include "json.hpp"

namespace deadnet {

namespace {

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) h = (h ^ c) * 1099511628211ull;
    return h;
}

std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// write + fsync; the line is on disk before this returns
void durable_append(const std::filesystem::path& path, const std::string& line) {
    const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (fd < 0) throw IoError("cannot open " + path.string() + ": " + std::strerror(errno));
    std::size_t done = 0;
    while (done < line.size()) {
        const auto n = ::write(fd, line.data() + done, line.size() - done);
        if (n < 0) {
            if (errno == EINTR) continue;
            const std::string why = std::strerror(errno);
            ::close(fd);
            throw IoError("write to " + path.string() + " failed: " + why);
        }
        done += static_cast<std::size_t>(n);
    }
    if (::fsync(fd) != 0) {
        const std::string why = std::strerror(errno);
        ::close(fd);
        throw IoError("fsync of " + path.string() + " failed: " + why);
    }
    ::close(fd);
}

// Complete lines of a log. A trailing fragment without a newline is a torn
// write and is cut from the file.
std::vector<std::string> read_log(const std::filesystem::path& path) {
    std::vector<std::string> lines;
    if (!std::filesystem::exists(path)) return lines;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    std::size_t start = 0;
    while (start < text.size()) {
        const auto nl = text.find('\n', start);
        if (nl == std::string::npos) {
            std::filesystem::resize_file(path, start);
            break;
        }
        if (nl > start) lines.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

std::string presentation_line(const Presentation& p) {
    nlohmann::ordered_json j;
    j["annotator"] = p.annotator;
    j["index"] = p.index;
    j["sequence_id"] = p.sequence_id;
    j["overlap"] = p.overlap;
    j["fallback"] = p.fallback;
    return j.dump() + "\n";
}

Presentation presentation_from_json(std::string_view line) {
    try {
        const auto j = nlohmann::json::parse(line);
        Presentation p;
        p.annotator = j.at("annotator").get<std::string>();
        p.index = j.at("index").get<std::size_t>();
        p.sequence_id = j.at("sequence_id").get<std::string>();
        p.overlap = j.value("overlap", false);
        p.fallback = j.value("fallback", false);
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad presentation line: ") + e.what());
    }
}

}  // namespace

std::string_view to_string(Judgment j) {
    switch (j) {
        case Judgment::Healthy: return "Healthy";
        case Judgment::Sick: return "Sick";
        case Judgment::Unsure: return "Unsure";
    }
    return "Unsure";
}

Judgment parse_judgment(std::string_view text) {
    if (text == "Healthy") return Judgment::Healthy;
    if (text == "Sick") return Judgment::Sick;
    if (text == "Unsure") return Judgment::Unsure;
    throw FormatError("label must be Healthy, Sick or Unsure, got '" + std::string(text) + "'");
}

std::string to_json_line(const AnnotationRecord& r) {
    nlohmann::ordered_json j;
    j["annotator"] = r.annotator;
    j["sequence_id"] = r.sequence_id;
    j["label"] = to_string(r.label);
    j["timestamp"] = r.timestamp;
    j["presentation"] = r.presentation;
    return j.dump();
}

AnnotationRecord annotation_from_json(std::string_view line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("annotation is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw FormatError("annotation must be a JSON object");
    AnnotationRecord r;
    try {
        r.annotator = j.at("annotator").get<std::string>();
        r.sequence_id = j.at("sequence_id").get<std::string>();
        r.label = parse_judgment(j.at("label").get<std::string>());
        r.timestamp = j.value("timestamp", std::string());
        r.presentation = j.value("presentation", std::size_t{0});
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad annotation record: ") + e.what());
    }
    if (r.annotator.empty()) throw FormatError("annotation without an annotator id");
    return r;
}

void SequenceItem::validate() const {
    if (id.empty()) throw FormatError("sequence without an id");
    if (frames.size() != kSequenceFrames) {
        throw FormatError("sequence " + id + " has " + std::to_string(frames.size()) + " frames, expected 10");
    }
    if (stage_position.empty()) throw FormatError("sequence " + id + " has no stage position");
    if (!(light_dose >= 0)) throw FormatError("sequence " + id + " has a negative light dose");
}

std::vector<SequenceItem> read_catalog(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read catalog " + path.string());
    const auto base = path.parent_path();
    std::vector<SequenceItem> items;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        SequenceItem s;
        try {
            const auto j = nlohmann::json::parse(line);
            s.id = j.at("id").get<std::string>();
            s.stage_position = j.at("stage_position").get<std::string>();
            s.light_dose = j.value("light_dose", 0.0);
            for (const auto& f : j.at("frames")) {
                std::filesystem::path p = f.get<std::string>();
                s.frames.push_back(p.is_relative() ? (base / p).string() : p.string());
            }
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        s.validate();
        items.push_back(std::move(s));
    }
    return items;
}

void write_catalog(const std::filesystem::path& path, const std::vector<SequenceItem>& items) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write catalog " + path.string());
    for (const auto& s : items) {
        s.validate();
        nlohmann::ordered_json j;
        j["id"] = s.id;
        j["stage_position"] = s.stage_position;
        j["light_dose"] = s.light_dose;
        j["frames"] = s.frames;
        out << j.dump() << '\n';
    }
    if (!out) throw IoError("write to " + path.string() + " failed");
}

std::string to_json(const ServiceConcordance& c) {
    nlohmann::ordered_json j;
    j["overlaps"] = c.overlaps;
    j["disagreements"] = c.disagreements;
    j["unsure_excluded"] = c.unsure_excluded;
    if (c.chain) {
        j["report"] = nlohmann::json::parse(to_json(*c.chain));
    } else {
        j["report"] = nullptr;
    }
    if (!c.note.empty()) j["note"] = c.note;
    return j.dump();
}

ServiceConcordance concordance_of(const std::vector<AnnotationRecord>& records) {
    std::map<std::string, std::vector<Judgment>> labels;
    for (const auto& r : records) labels[r.sequence_id].push_back(r.label);
    ServiceConcordance c;
    for (const auto& [id, ls] : labels) {
        if (ls.size() < 2) continue;
        if (std::find(ls.begin(), ls.end(), Judgment::Unsure) != ls.end()) {
            ++c.unsure_excluded;
            continue;
        }
        ++c.overlaps;
        if (std::adjacent_find(ls.begin(), ls.end(), std::not_equal_to<>()) != ls.end()) ++c.disagreements;
    }
    if (c.overlaps == 0) {
        c.note = "no overlapping annotations without Unsure yet";
    } else {
        try {
            c.chain = ambiguity_chain(c.disagreements, c.overlaps);
        } catch (const Error& e) {
            c.note = e.what();
        }
    }
    return c;
}

std::vector<AnnotationRecord> read_annotation_log(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw IoError("annotation log not found: " + path.string());
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    std::vector<AnnotationRecord> out;
    std::size_t start = 0;
    for (auto nl = text.find('\n'); nl != std::string::npos; start = nl + 1, nl = text.find('\n', start)) {
        if (nl > start) out.push_back(annotation_from_json(std::string_view(text).substr(start, nl - start)));
    }
    return out;
}

AnnotationStore::AnnotationStore(std::filesystem::path dir, std::vector<SequenceItem> catalog, std::uint64_t seed)
    : dir_(std::move(dir)), catalog_(std::move(catalog)), seed_(seed) {
    if (catalog_.empty()) throw Error("annotation catalog is empty");
    for (std::size_t i = 0; i < catalog_.size(); ++i) {
        catalog_[i].validate();
        catalog_[i].annotation_count = 0;
        catalog_[i].scored_by.clear();
        if (!by_id_.emplace(catalog_[i].id, i).second) throw FormatError("duplicate sequence id " + catalog_[i].id);
    }
    std::filesystem::create_directories(dir_);
    replay();
}

void AnnotationStore::replay() {
    for (const auto& line : read_log(annotation_log())) {
        const auto r = annotation_from_json(line);
        if (!by_id_.count(r.sequence_id)) throw FormatError("log names unknown sequence " + r.sequence_id);
        const auto it = by_key_.find({r.annotator, r.sequence_id});
        if (it != by_key_.end()) {
            // a retried append after a lost acknowledgment
            if (records_[it->second].label == r.label) continue;
            throw FormatError("log holds conflicting labels from " + r.annotator + " for " + r.sequence_id);
        }
        apply(r);
    }
    for (const auto& line : read_log(presentation_log())) {
        auto p = presentation_from_json(line);
        auto& n = served_[p.annotator];
        n = std::max(n, p.index);
        presentations_.push_back(std::move(p));
    }
}

void AnnotationStore::apply(const AnnotationRecord& r) {
    by_key_[{r.annotator, r.sequence_id}] = records_.size();
    records_.push_back(r);
    auto& s = catalog_[by_id_.at(r.sequence_id)];
    ++s.annotation_count;
    s.scored_by.insert(r.annotator);
}

SequenceItem AnnotationStore::item_locked(std::size_t i) const { return catalog_[i]; }

SequenceItem AnnotationStore::next_sequence(const std::string& annotator, Presentation* served) {
    if (annotator.empty()) throw Error("annotator id required");
    std::unique_lock lock(mutex_);
    std::vector<std::size_t> fresh, overlap;
    for (std::size_t i = 0; i < catalog_.size(); ++i) {
        const auto& s = catalog_[i];
        if (s.scored_by.count(annotator)) continue;
        fresh.push_back(i);
        if (!s.scored_by.empty()) overlap.push_back(i);
    }
    if (fresh.empty()) throw NotFoundError("annotator " + annotator + " has scored every sequence");

    Presentation p;
    p.annotator = annotator;
    p.index = served_[annotator] + 1;
    const bool overlap_turn = p.index % kOverlapEvery == 0;
    p.overlap = overlap_turn && !overlap.empty();
    p.fallback = overlap_turn && overlap.empty();
    const auto& pool = p.overlap ? overlap : fresh;
    std::mt19937_64 rng(mix_seed(seed_, fnv1a(annotator), p.index));
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    const std::size_t chosen = pool[pick(rng)];
    p.sequence_id = catalog_[chosen].id;

    durable_append(presentation_log(), presentation_line(p));
    served_[annotator] = p.index;
    presentations_.push_back(p);
    if (served) *served = p;
    return item_locked(chosen);
}

Ack AnnotationStore::record_annotation(AnnotationRecord record) {
    if (record.annotator.empty()) throw Error("annotator id required");
    std::unique_lock lock(mutex_);
    if (!by_id_.count(record.sequence_id)) throw NotFoundError("unknown sequence " + record.sequence_id);
    if (const auto it = by_key_.find({record.annotator, record.sequence_id}); it != by_key_.end()) {
        const auto& prior = records_[it->second];
        if (prior.label == record.label) return Ack::Duplicate;
        throw ConflictError(record.annotator + " already labeled " + record.sequence_id + " as " +
                            std::string(to_string(prior.label)));
    }
    if (record.timestamp.empty()) record.timestamp = utc_now();
    durable_append(annotation_log(), to_json_line(record) + "\n");
    apply(record);
    if (after_append) after_append(record);
    return Ack::Appended;
}

ServiceConcordance AnnotationStore::concordance_report() const {
    std::shared_lock lock(mutex_);
    return concordance_of(records_);
}

Split<ImageRecord> AnnotationStore::export_training_set(double train_fraction, std::uint64_t seed) const {
    if (!(train_fraction > 0 && train_fraction < 1)) throw Error("train fraction must lie in (0, 1)");
    std::shared_lock lock(mutex_);
    if (records_.empty()) throw Error("no annotations to export");
    std::vector<std::vector<Judgment>> labels(catalog_.size());
    for (const auto& r : records_) labels[by_id_.at(r.sequence_id)].push_back(r.label);
    std::vector<ImageRecord> frames;
    for (std::size_t i = 0; i < catalog_.size(); ++i) {
        std::optional<Judgment> agreed;
        bool unanimous = true;
        for (auto l : labels[i]) {
            if (l == Judgment::Unsure) continue;
            if (agreed && *agreed != l) unanimous = false;
            agreed = l;
        }
        if (!agreed || !unanimous) continue;
        const auto& s = catalog_[i];
        for (std::size_t k = 0; k < kSequenceFrames; ++k) {
            ImageRecord rec;
            rec.path = s.frames[k];
            rec.stage_position = s.stage_position;
            rec.light_dose = s.light_dose;
            rec.frame_index = static_cast<int>(k);
            rec.label = *agreed == Judgment::Sick ? Label::Sick : Label::Healthy;
            frames.push_back(std::move(rec));
        }
    }
    if (frames.empty()) throw Error("no sequence passes the concordance filter");
    return split_by_position(frames, 1.0 - train_fraction, seed);
}

SequenceItem AnnotationStore::sequence(const std::string& id) const {
    std::shared_lock lock(mutex_);
    const auto it = by_id_.find(id);
    if (it == by_id_.end()) throw NotFoundError("unknown sequence " + id);
    return item_locked(it->second);
}

std::vector<AnnotationRecord> AnnotationStore::annotations() const {
    std::shared_lock lock(mutex_);
    return records_;
}

std::vector<Presentation> AnnotationStore::presentations() const {
    std::shared_lock lock(mutex_);
    return presentations_;
}

std::string split_manifest_json(const Split<ImageRecord>& split) {
    auto side = [](const std::vector<ImageRecord>& rs) {
        auto arr = nlohmann::ordered_json::array();
        for (const auto& r : rs) arr.push_back(nlohmann::ordered_json::parse(to_json_line(r)));
        return arr;
    };
    nlohmann::ordered_json j;
    j["train"] = side(split.train);
    j["test"] = side(split.test);
    return j.dump();
}

}  // namespace deadnet
