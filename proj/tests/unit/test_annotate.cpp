#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include "deadnet/annotate.hpp"
#include "deadnet/server.hpp"
#include "doctest.h"
#include "httplib.h"
#include "json.hpp"

using namespace deadnet;
namespace fs = std::filesystem;

namespace {

std::vector<SequenceItem> make_catalog(std::size_t n, std::size_t per_position = 3) {
    std::vector<SequenceItem> items;
    for (std::size_t i = 0; i < n; ++i) {
        SequenceItem s;
        s.id = "seq" + std::to_string(i);
        s.stage_position = "pos" + std::to_string(i / per_position);
        s.light_dose = static_cast<double>(i % 9) * 10;
        for (std::size_t k = 0; k < kSequenceFrames; ++k) s.frames.push_back("frames/" + s.id + "_" + std::to_string(k) + ".png");
        items.push_back(std::move(s));
    }
    return items;
}

fs::path fresh_dir(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("deadnet_annotate_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::size_t line_count(const fs::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string l; std::getline(in, l);) ++n;
    return n;
}

AnnotationRecord rec(const std::string& a, const std::string& s, Judgment j) { return {a, s, j, "", 0}; }

}  // namespace

TEST_CASE("record_annotation appends, dedupes and rejects conflicts") {
    const auto dir = fresh_dir("record");
    AnnotationStore store(dir, make_catalog(6));
    CHECK(store.record_annotation(rec("ann", "seq1", Judgment::Sick)) == Ack::Appended);
    CHECK(line_count(store.annotation_log()) == 1);
    {
        std::ifstream in(store.annotation_log());
        std::string line;
        std::getline(in, line);
        CHECK(annotation_from_json(line) == store.annotations()[0]);
    }
    CHECK(store.record_annotation(rec("ann", "seq1", Judgment::Sick)) == Ack::Duplicate);
    CHECK(line_count(store.annotation_log()) == 1);
    CHECK_THROWS_AS(store.record_annotation(rec("ann", "seq1", Judgment::Healthy)), ConflictError);
    CHECK_THROWS_AS(store.record_annotation(rec("ann", "nope", Judgment::Sick)), NotFoundError);
    CHECK_THROWS_AS(annotation_from_json(R"({"annotator":"a","sequence_id":"seq1","label":"Maybe"})"), FormatError);
    CHECK(line_count(store.annotation_log()) == 1);
    CHECK(store.sequence("seq1").annotation_count == 1);
    CHECK(store.sequence("seq1").scored_by == std::set<std::string>{"ann"});
}

TEST_CASE("next_sequence overlap rule") {
    const auto dir = fresh_dir("next");
    AnnotationStore store(dir, make_catalog(40), 7);

    SUBCASE("single annotator falls back at every 5th") {
        for (int i = 1; i <= 10; ++i) {
            Presentation p;
            const auto s = store.next_sequence("solo", &p);
            CHECK(p.index == static_cast<std::size_t>(i));
            CHECK_FALSE(p.overlap);
            CHECK(p.fallback == (i % 5 == 0));
            CHECK(s.scored_by.count("solo") == 0);
            store.record_annotation(rec("solo", s.id, Judgment::Healthy));
        }
    }
    SUBCASE("overlap draws come from the other annotator's pool") {
        for (int i = 0; i < 8; ++i) {
            const auto s = store.next_sequence("first");
            store.record_annotation(rec("first", s.id, Judgment::Sick));
        }
        std::set<std::string> seen;
        for (int i = 1; i <= 15; ++i) {
            Presentation p;
            const auto s = store.next_sequence("second", &p);
            CHECK(p.overlap == (i % 5 == 0));
            if (p.overlap) {
                CHECK_FALSE(s.scored_by.empty());
                CHECK(s.scored_by.count("second") == 0);
            }
            CHECK(seen.insert(s.id).second);
            store.record_annotation(rec("second", s.id, Judgment::Sick));
        }
    }
    SUBCASE("exhausted pool") {
        AnnotationStore tiny(fresh_dir("tiny"), make_catalog(2));
        for (int i = 0; i < 2; ++i) tiny.record_annotation(rec("a", tiny.next_sequence("a").id, Judgment::Sick));
        CHECK_THROWS_AS(tiny.next_sequence("a"), NotFoundError);
    }
}

TEST_CASE("presentation counters and records survive a restart") {
    const auto dir = fresh_dir("restart");
    const auto cat = make_catalog(20);
    {
        AnnotationStore store(dir, cat, 3);
        for (int i = 0; i < 3; ++i) store.record_annotation(rec("a", store.next_sequence("a").id, Judgment::Sick));
    }
    AnnotationStore again(dir, cat, 3);
    CHECK(again.annotations().size() == 3);
    Presentation p;
    again.next_sequence("a", &p);
    CHECK(p.index == 4);
}

TEST_CASE("crash between append and acknowledgment") {
    const auto dir = fresh_dir("crash");
    const auto cat = make_catalog(10);
    {
        AnnotationStore store(dir, cat);
        store.record_annotation(rec("a", "seq0", Judgment::Sick));
        store.after_append = [](const AnnotationRecord&) { throw std::runtime_error("power cut"); };
        CHECK_THROWS(store.record_annotation(rec("a", "seq1", Judgment::Healthy)));
    }
    // torn tail from a second, interrupted write
    std::ofstream(dir / "annotations.jsonl", std::ios::app) << R"({"annotator":"a","sequence_id":"seq2","lab)";

    AnnotationStore replayed(dir, cat);
    const auto recs = replayed.annotations();
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].sequence_id == "seq0");
    CHECK(recs[1].sequence_id == "seq1");
    CHECK(line_count(replayed.annotation_log()) == 2);
    // the client retries the unacknowledged request
    CHECK(replayed.record_annotation(rec("a", "seq1", Judgment::Healthy)) == Ack::Duplicate);
    CHECK(replayed.record_annotation(rec("a", "seq2", Judgment::Sick)) == Ack::Appended);
    CHECK(line_count(replayed.annotation_log()) == 3);
}

TEST_CASE("concordance report") {
    const auto cat = make_catalog(12);
    SUBCASE("full agreement") {
        AnnotationStore store(fresh_dir("agree"), cat);
        for (int i = 0; i < 6; ++i)
            for (const char* a : {"x", "y"}) store.record_annotation(rec(a, "seq" + std::to_string(i), Judgment::Sick));
        const auto c = store.concordance_report();
        CHECK(c.overlaps == 6);
        CHECK(c.disagreements == 0);
        REQUIRE(c.chain);
        CHECK(c.chain->d == 0.0);
        CHECK(c.chain->u == 1.0);
    }
    SUBCASE("unsure pairs are excluded") {
        AnnotationStore store(fresh_dir("unsure"), cat);
        store.record_annotation(rec("x", "seq0", Judgment::Sick));
        store.record_annotation(rec("y", "seq0", Judgment::Unsure));
        store.record_annotation(rec("x", "seq1", Judgment::Sick));
        store.record_annotation(rec("y", "seq1", Judgment::Sick));
        store.record_annotation(rec("x", "seq2", Judgment::Healthy));
        store.record_annotation(rec("y", "seq2", Judgment::Sick));
        store.record_annotation(rec("x", "seq3", Judgment::Healthy));
        store.record_annotation(rec("x", "seq4", Judgment::Healthy));
        store.record_annotation(rec("y", "seq4", Judgment::Healthy));
        const auto c = store.concordance_report();
        CHECK(c.overlaps == 3);
        CHECK(c.disagreements == 1);
        CHECK(c.unsure_excluded == 1);
        REQUIRE(c.chain);
        CHECK(c.chain->d == doctest::Approx(1.0 / 3));
    }
    SUBCASE("nothing to report yet") {
        AnnotationStore store(fresh_dir("empty"), cat);
        const auto c = store.concordance_report();
        CHECK(c.overlaps == 0);
        CHECK_FALSE(c.chain);
        CHECK(nlohmann::json::parse(to_json(c))["report"].is_null());
    }
}

TEST_CASE("export_training_set") {
    const auto cat = make_catalog(24, 2);
    AnnotationStore store(fresh_dir("export"), cat);
    CHECK_THROWS(store.export_training_set());
    store.record_annotation(rec("x", "seq0", Judgment::Sick));
    store.record_annotation(rec("y", "seq0", Judgment::Sick));
    store.record_annotation(rec("x", "seq1", Judgment::Healthy));
    store.record_annotation(rec("y", "seq1", Judgment::Sick));
    store.record_annotation(rec("x", "seq2", Judgment::Unsure));
    store.record_annotation(rec("x", "seq3", Judgment::Healthy));
    store.record_annotation(rec("y", "seq3", Judgment::Unsure));
    for (int i = 4; i < 24; ++i)
        store.record_annotation(rec("x", "seq" + std::to_string(i), i % 2 ? Judgment::Healthy : Judgment::Sick));

    const auto split = store.export_training_set(0.75, 5);
    std::map<std::string, std::vector<ImageRecord>> by_seq;
    std::set<std::string> train_pos, test_pos;
    for (const auto& r : split.train) train_pos.insert(r.stage_position);
    for (const auto& r : split.test) test_pos.insert(r.stage_position);
    for (const auto* side : {&split.train, &split.test})
        for (const auto& r : *side) by_seq[r.path.substr(7, r.path.find('_') - 7)].push_back(r);
    for (const auto& p : train_pos) CHECK(test_pos.count(p) == 0);

    REQUIRE(by_seq.count("seq0"));
    CHECK(by_seq["seq0"].size() == 10);
    for (const auto& r : by_seq["seq0"]) CHECK(r.label == Label::Sick);
    CHECK(by_seq.count("seq1") == 0);
    CHECK(by_seq.count("seq2") == 0);
    REQUIRE(by_seq.count("seq3"));
    CHECK(by_seq["seq3"][0].label == Label::Healthy);
    CHECK(split.train.size() + split.test.size() == 22 * 10);
    for (int k = 0; k < 10; ++k) CHECK(by_seq["seq0"][k].frame_index == k);

    CHECK(split_manifest_json(split) == split_manifest_json(store.export_training_set(0.75, 5)));
}

TEST_CASE("http round trip") {
    const auto dir = fresh_dir("http");
    fs::create_directories(dir / "frames");
    auto cat = make_catalog(6);
    for (auto& s : cat)
        for (auto& f : s.frames) {
            f = (dir / f).string();
            std::ofstream(f, std::ios::binary) << "frame:" << f;
        }
    AnnotationStore store(dir / "logs", cat);
    ServerOptions opts;
    opts.port = 0;
    AnnotateServer server(store, opts);
    const int port = server.bind();
    std::thread t([&] { server.run(); });

    httplib::Client cli("127.0.0.1", port);
    auto next = cli.Get("/api/next?annotator=ann");
    REQUIRE(next);
    CHECK(next->status == 200);
    const auto j = nlohmann::json::parse(next->body);
    CHECK(j["presentation"] == 1);
    CHECK(j["frames"].size() == 10);
    CHECK(next->body.find("dose") == std::string::npos);
    const std::string id = j["sequence_id"];

    auto frame = cli.Get(j["frames"][3].get<std::string>());
    REQUIRE(frame);
    CHECK(frame->status == 200);
    CHECK(frame->body == "frame:" + store.sequence(id).frames[3]);
    CHECK(cli.Get("/api/sequence/" + id + "/frame/10")->status == 404);
    CHECK(cli.Get("/api/next")->status == 400);

    const auto body = nlohmann::json{{"annotator", "ann"}, {"sequence_id", id}, {"label", "Sick"}}.dump();
    CHECK(cli.Post("/api/annotate", body, "application/json")->status == 201);
    CHECK(cli.Post("/api/annotate", body, "application/json")->status == 200);
    const auto clash = nlohmann::json{{"annotator", "ann"}, {"sequence_id", id}, {"label", "Healthy"}}.dump();
    CHECK(cli.Post("/api/annotate", clash, "application/json")->status == 409);
    CHECK(cli.Post("/api/annotate", "{", "application/json")->status == 400);
    CHECK(line_count(store.annotation_log()) == 1);

    auto conc = cli.Get("/api/concordance");
    REQUIRE(conc);
    CHECK(nlohmann::json::parse(conc->body)["overlaps"] == 0);
    CHECK(cli.Get("/api/export")->status == 422);

    server.stop();
    t.join();
}
