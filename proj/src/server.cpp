#include "deadnet/server.hpp"

#include <fstream>
#include <sstream>

#include "httplib.h"
#include "json.hpp"

namespace deadnet {

namespace {

void send_json(httplib::Response& res, const std::string& body, int status = 200) {
    res.status = status;
    res.set_content(body, "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
    send_json(res, nlohmann::json{{"error", message}}.dump(), status);
}

int status_of(const Error& e) {
    if (dynamic_cast<const NotFoundError*>(&e)) return 404;
    if (dynamic_cast<const ConflictError*>(&e)) return 409;
    if (dynamic_cast<const FormatError*>(&e)) return 400;
    return 422;
}

// wraps a handler so domain errors become JSON error responses
template <typename F>
httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
        try {
            f(req, res);
        } catch (const Error& e) {
            send_error(res, status_of(e), e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, e.what());
        }
    };
}

// light_dose is deliberately left out: annotation is blind
std::string sequence_json(const SequenceItem& s, const Presentation& p) {
    nlohmann::ordered_json j;
    j["sequence_id"] = s.id;
    j["presentation"] = p.index;
    j["frame_count"] = s.frames.size();
    auto urls = nlohmann::json::array();
    for (std::size_t k = 0; k < s.frames.size(); ++k) {
        urls.push_back("/api/sequence/" + s.id + "/frame/" + std::to_string(k));
    }
    j["frames"] = urls;
    return j.dump();
}

std::string content_type(const std::filesystem::path& p) {
    const auto ext = p.extension().string();
    if (ext == ".png") return "image/png";
    if (ext == ".pgm") return "image/x-portable-graymap";
    if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
    if (ext == ".tif" || ext == ".tiff") return "image/tiff";
    return "application/octet-stream";
}

}  // namespace

struct AnnotateServer::Impl {
    AnnotationStore& store;
    ServerOptions options;
    httplib::Server http;
    int port = -1;

    Impl(AnnotationStore& s, ServerOptions o) : store(s), options(std::move(o)) {}

    void routes() {
        http.Get("/api/next", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto annotator = req.get_param_value("annotator");
            if (annotator.empty()) throw FormatError("annotator query parameter required");
            Presentation p;
            const auto s = store.next_sequence(annotator, &p);
            send_json(res, sequence_json(s, p));
        }));
        http.Get(R"(/api/sequence/([^/]+)/frame/(\d+))", guarded([this](const httplib::Request& req,
                                                                         httplib::Response& res) {
            const auto s = store.sequence(req.matches[1]);
            const auto k = std::stoul(req.matches[2]);
            if (k >= s.frames.size()) throw NotFoundError("frame " + std::to_string(k) + " out of range");
            std::ifstream in(s.frames[k], std::ios::binary);
            if (!in) throw NotFoundError("frame file missing: " + s.frames[k]);
            std::stringstream ss;
            ss << in.rdbuf();
            res.set_content(ss.str(), content_type(s.frames[k]));
        }));
        http.Post("/api/annotate", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto record = annotation_from_json(req.body);
            const auto ack = store.record_annotation(record);
            send_json(res, nlohmann::json{{"status", ack == Ack::Appended ? "appended" : "duplicate"}}.dump(),
                      ack == Ack::Appended ? 201 : 200);
        }));
        http.Get("/api/concordance", guarded([this](const httplib::Request&, httplib::Response& res) {
            send_json(res, to_json(store.concordance_report()));
        }));
        http.Get("/api/export", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto seed = options.export_seed;
            auto fraction = options.train_fraction;
            try {
                if (req.has_param("seed")) seed = std::stoull(req.get_param_value("seed"));
                if (req.has_param("train_fraction")) fraction = std::stod(req.get_param_value("train_fraction"));
            } catch (const std::exception&) {
                throw FormatError("bad seed or train_fraction");
            }
            send_json(res, split_manifest_json(store.export_training_set(fraction, seed)));
        }));
        if (!options.static_dir.empty() && !http.set_mount_point("/", options.static_dir.string())) {
            throw IoError("cannot serve " + options.static_dir.string());
        }
    }
};

AnnotateServer::AnnotateServer(AnnotationStore& store, ServerOptions options)
    : impl_(std::make_unique<Impl>(store, std::move(options))) {
    impl_->routes();
}

AnnotateServer::~AnnotateServer() { stop(); }

int AnnotateServer::bind() {
    auto& o = impl_->options;
    impl_->port = o.port == 0 ? impl_->http.bind_to_any_port(o.host) : (impl_->http.bind_to_port(o.host, o.port) ? o.port : -1);
    if (impl_->port < 0) throw IoError("cannot bind " + o.host + ":" + std::to_string(o.port));
    return impl_->port;
}

void AnnotateServer::run() {
    if (impl_->port < 0) bind();
    impl_->http.listen_after_bind();
}

void AnnotateServer::stop() {
    if (impl_ && impl_->http.is_running()) impl_->http.stop();
}

}  // namespace deadnet
