// deadnet: command-line front end. JSON results go to stdout, progress and
// human summaries to stderr. Exit status: 0 ok, 1 domain error, 2 usage error.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "CLI11.hpp"
#include "deadnet/annotate.hpp"
#include "deadnet/augment.hpp"
#include "deadnet/heatmap.hpp"
#include "deadnet/interpret.hpp"
#include "deadnet/parallel.hpp"
#include "deadnet/random.hpp"
#include "deadnet/server.hpp"
#include "deadnet/stats.hpp"
#include "deadnet/trainer.hpp"
#include "deadnet/version.hpp"
#include "json.hpp"

using namespace deadnet;
namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct Common {
    fs::path out = ".";
    std::uint64_t seed = 1;
};

void emit(const json& j) { std::cout << j.dump(2) << std::endl; }

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_relative() ? base / path : path;
}

std::vector<LabeledImage> load_labeled(const fs::path& manifest) {
    const auto base = manifest.parent_path();
    std::vector<LabeledImage> out;
    for (const auto& r : read_manifest(manifest)) {
        if (r.label == Label::Unlabeled) throw FormatError("manifest entry without a label: " + r.path);
        out.push_back({load_image(resolve(base, r.path)), class_index(r.label), r.path, r.stage_position});
    }
    if (out.empty()) throw Error("manifest " + manifest.string() + " is empty");
    return out;
}

Network load_network(const fs::path& checkpoint) { return load_checkpoint(checkpoint).network; }

// the image as the network sees it: the centred input crop
Tensor network_view(const Network& net, const Tensor& image) {
    const auto& in = net.spec().input;
    if (image.dim(0) < in.height || image.dim(1) < in.width) {
        throw ShapeError("image " + shape_string(image.shape()) + " smaller than the network input " + to_string(in));
    }
    return center_crop(image, in, false);
}

void save_display(const Tensor& image, const fs::path& path) {
    save_image(display_range(image), path, 16);
}

class Runner {
public:
    Runner(int argc, char** argv) : argv_(argv, argv + argc) {}

    int run() {
        CLI::App app{"DeadNet phototoxicity classifier toolkit"};
        app.set_version_flag("--version", std::string(kVersion));
        app.require_subcommand(1);
        std::size_t threads = 0;
        app.add_option("--threads", threads, "worker threads (default DEADNET_THREADS or all cores)");

        add_synth(app);
        add_augment(app);
        add_train(app);
        add_eval(app);
        add_classify(app);
        add_heatmap(app);
        add_gradcam(app);
        add_classmodel(app);
        add_bootstrap(app);
        add_concordance(app);
        add_serve(app);

        try {
            app.parse(static_cast<int>(argv_.size()), argv_.data());
        } catch (const CLI::ParseError& e) {
            const int code = app.exit(e);
            return code == 0 ? 0 : 2;
        }
        if (threads) set_thread_limit(threads);
        command_ = app.get_subcommands().front()->get_name();
        try {
            fs::create_directories(common_.out);
            write_record(app);
            action_();
            return 0;
        } catch (const Error& e) {
            std::cerr << "error: " << e.what() << std::endl;
            return 1;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << std::endl;
            return 1;
        }
    }

private:
    std::vector<char*> argv_;
    Common common_;
    std::string command_;
    std::function<void()> action_;

    CLI::App* command(CLI::App& app, const std::string& name, const std::string& help, bool with_seed = false) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--out", common_.out, "output directory")->capture_default_str();
        if (with_seed) sub->add_option("--seed", common_.seed, "random seed")->capture_default_str();
        return sub;
    }

    // config + seeds + versions; argv alone reproduces the run
    void write_record(CLI::App& app) const {
        json j;
        j["tool"] = "deadnet";
        j["version"] = kVersion;
        j["command"] = command_;
        j["argv"] = std::vector<std::string>(argv_.begin(), argv_.end());
        j["seed"] = common_.seed;
        j["threads"] = thread_limit();
        j["config"] = app.get_subcommand(command_)->config_to_str(true, false);
        j["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                     std::to_string(EIGEN_MINOR_VERSION);
        j["compiler"] = __VERSION__;
        std::ofstream(common_.out / (command_ + ".run.json")) << j.dump(2) << '\n';
    }

    void add_synth(CLI::App& app) {
        auto* sub = command(app, "synth", "generate the synthetic proxy corpus", true);
        auto count = std::make_shared<std::size_t>(1000);
        auto size = std::make_shared<std::size_t>(74);
        auto per_position = std::make_shared<std::size_t>(10);
        auto quadrant = std::make_shared<bool>(false);
        auto sequences = std::make_shared<std::size_t>(0);
        sub->add_option("--count", *count, "images per class")->capture_default_str();
        sub->add_option("--size", *size, "image height and width")->capture_default_str()->check(CLI::Range(16, 4096));
        sub->add_option("--per-position", *per_position, "images sharing a stage position")->capture_default_str();
        sub->add_flag("--quadrant", *quadrant, "confine sick structure to one quadrant");
        sub->add_option("--sequences", *sequences, "also write N 10-frame sequences and an annotation catalog");
        sub->callback([=, this] {
            action_ = [=, this] {
                SyntheticSpec spec;
                spec.seed = common_.seed;
                spec.height = spec.width = *size;
                spec.images_per_position = std::max<std::size_t>(1, *per_position);
                spec.sick_region = *quadrant ? SickRegion::Quadrant : SickRegion::Whole;
                std::vector<ImageRecord> records;
                json quads = json::object();
                for (auto label : {Label::Healthy, Label::Sick}) {
                    fs::create_directories(common_.out / "synthetic" / (label == Label::Healthy ? "healthy" : "sick"));
                    for (std::size_t i = 0; i < *count; ++i) {
                        const auto s = generate_synthetic_one(spec, label, i);
                        save_image(s.image, common_.out / s.record.path, 16);
                        records.push_back(s.record);
                        if (s.quadrant >= 0) quads[s.record.path] = s.quadrant;
                    }
                }
                write_manifest(common_.out / "manifest.jsonl", records);
                json j{{"manifest", (common_.out / "manifest.jsonl").string()},
                       {"images", records.size()},
                       {"source", kSyntheticSource}};
                if (*quadrant) {
                    std::ofstream(common_.out / "quadrants.json") << quads.dump() << '\n';
                    j["quadrants"] = (common_.out / "quadrants.json").string();
                }
                if (*sequences) j["catalog"] = write_sequences(spec, *sequences).string();
                emit(j);
            };
        });
    }

    fs::path write_sequences(const SyntheticSpec& base, std::size_t n) {
        fs::create_directories(common_.out / "sequences");
        std::vector<SequenceItem> items;
        std::mt19937_64 rng(mix_seed(common_.seed, 77));
        std::uniform_real_distribution<double> dose(0.0, 80.0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto label = i % 2 ? Label::Sick : Label::Healthy;
            const auto scene = generate_synthetic_one(base, label, 100000 + i);
            SequenceItem s;
            char id[32];
            std::snprintf(id, sizeof id, "s%05zu", i);
            s.id = id;
            s.stage_position = "seqpos-" + std::to_string(i / 3);
            s.light_dose = dose(rng);
            for (std::size_t k = 0; k < kSequenceFrames; ++k) {
                auto frame = add_noise(scene.image, 0.01, mix_seed(common_.seed, i, k));
                for (auto& v : frame.data()) v = std::clamp(v, 0.0f, 1.0f);
                const auto rel = "sequences/" + s.id + "_f" + std::to_string(k) + ".png";
                save_image(frame, common_.out / rel, 8);
                s.frames.push_back(rel);
            }
            items.push_back(std::move(s));
        }
        const auto path = common_.out / "catalog.jsonl";
        write_catalog(path, items);
        return path;
    }

    void add_augment(CLI::App& app) {
        auto* sub = command(app, "augment", "run augmentation pipeline A (full image) or B (10-frame sequence)", true);
        auto image = std::make_shared<std::string>();
        auto frames = std::make_shared<std::vector<std::string>>();
        auto label = std::make_shared<std::string>("Sick");
        auto position = std::make_shared<std::string>("unknown");
        auto write = std::make_shared<bool>(false);
        auto exhaustive = std::make_shared<bool>(false);
        auto* img_opt = sub->add_option("--image", *image, "full image for pipeline A");
        auto* fr_opt = sub->add_option("--frames", *frames, "10 frames for pipeline B")->delimiter(',');
        img_opt->excludes(fr_opt);
        sub->add_option("--label", *label, "Healthy or Sick")->capture_default_str();
        sub->add_option("--stage-position", *position)->capture_default_str();
        sub->add_flag("--write", *write, "write each augmented image as raw float32 under --out");
        sub->add_flag("--exhaustive", *exhaustive, "pipeline A: every crop that fits instead of the 6x9 grid");
        sub->callback([=, this] {
            if (image->empty() && frames->empty()) throw CLI::RequiredError("--image or --frames");
            action_ = [=, this] {
                AugmentConfig cfg;
                cfg.seed = common_.seed;
                cfg.exhaustive_crops = *exhaustive;
                const auto lab = parse_label(*label);
                std::size_t written = 0;
                const auto dir = common_.out / "augmented";
                if (*write) fs::create_directories(dir);
                json items = json::array();
                auto sink = [&](AugmentedImage&& it) {
                    if (!*write) return;
                    char name[32];
                    std::snprintf(name, sizeof name, "%06zu.f32", written++);
                    json side{{"label", to_string(it.label)}, {"stage_position", it.stage_position},
                              {"warp", it.warp}, {"dihedral", it.dihedral}, {"blur", it.blur},
                              {"blur_sigma", it.blur_sigma}, {"crop", it.crop}, {"frame", it.frame},
                              {"noise", it.noise}};
                    save_raw(it.image, dir / name, side.dump());
                };
                std::size_t n;
                std::string pipeline;
                if (!image->empty()) {
                    pipeline = "A";
                    n = pipeline_A(load_image(*image), lab, *position, cfg, sink);
                } else {
                    pipeline = "B";
                    std::vector<Tensor> seq;
                    for (const auto& f : *frames) seq.push_back(load_image(f));
                    n = pipeline_B(seq, lab, *position, cfg, sink);
                }
                emit({{"pipeline", pipeline}, {"count", n}, {"written", written}});
            };
        });
    }

    void add_train(CLI::App& app) {
        auto* sub = command(app, "train", "train DeadNet on a labeled manifest", true);
        auto manifest = std::make_shared<std::string>();
        auto cfg = std::make_shared<TrainConfig>();
        auto input = std::make_shared<std::size_t>(64);
        auto test_fraction = std::make_shared<double>(0.2);
        sub->add_option("--manifest", *manifest, "labeled image manifest (JSON-lines)")->required();
        sub->add_option("--iterations", cfg->max_iterations)->capture_default_str();
        sub->add_option("--batch", cfg->batch_size)->capture_default_str();
        sub->add_option("--base-lr", cfg->base_lr)->capture_default_str();
        sub->add_option("--eval-interval", cfg->eval_interval)->capture_default_str();
        sub->add_option("--input", *input, "network input extent (64 or 220)")->capture_default_str();
        sub->add_option("--test-fraction", *test_fraction, "share of stage positions held out")->capture_default_str();
        sub->callback([=, this] {
            action_ = [=, this] {
                cfg->seed = common_.seed;
                cfg->validate();
                const auto data = load_labeled(*manifest);
                const auto split = split_by_position(data, *test_fraction, mix_seed(common_.seed, 1));
                Network net(NetworkSpec::deadnet(*input));
                xavier_init(net, mix_seed(common_.seed, 2));
                std::cerr << "training on " << split.train.size() << " images, validating on " << split.test.size()
                          << std::endl;
                const auto log = train(net, split.train, split.test, *cfg, [](const TrainRecord& r) {
                    std::cerr << "iter " << r.iteration << " train_loss " << r.train_loss << " val_loss "
                              << r.val_loss << " val_acc " << r.val_acc << std::endl;
                });
                const auto ckpt = common_.out / "model.ckpt";
                save_checkpoint(net, ckpt, cfg->max_iterations, common_.seed);
                log.write_csv(common_.out / "train_log.csv");
                const auto eval = evaluate(net, split.test, cfg->normalize_crops);
                write_classifications(common_.out / "test_classifications.jsonl", eval.items);
                auto ids = [](const std::vector<LabeledImage>& v) {
                    std::vector<std::string> out;
                    for (const auto& it : v) out.push_back(it.id);
                    return out;
                };
                json split_ids;
                split_ids["train"] = ids(split.train);
                split_ids["test"] = ids(split.test);
                std::ofstream(common_.out / "split.json") << split_ids.dump() << '\n';
                emit({{"checkpoint", ckpt.string()},
                      {"iterations", cfg->max_iterations},
                      {"train_images", split.train.size()},
                      {"test_images", split.test.size()},
                      {"test_accuracy", eval.accuracy},
                      {"test_loss", eval.loss}});
            };
        });
    }

    void add_eval(CLI::App& app) {
        auto* sub = command(app, "eval", "evaluate a checkpoint on a labeled manifest");
        auto manifest = std::make_shared<std::string>();
        auto ckpt = std::make_shared<std::string>();
        sub->add_option("--manifest", *manifest)->required();
        sub->add_option("--checkpoint", *ckpt)->required();
        sub->callback([=, this] {
            action_ = [=, this] {
                const auto net = load_network(*ckpt);
                const auto eval = evaluate(net, load_labeled(*manifest));
                const auto path = common_.out / "classifications.jsonl";
                write_classifications(path, eval.items);
                emit({{"accuracy", eval.accuracy}, {"loss", eval.loss}, {"images", eval.items.size()},
                      {"classifications", path.string()}});
            };
        });
    }

    void add_classify(CLI::App& app) {
        auto* sub = command(app, "classify", "classify one transmitted-light image");
        auto ckpt = std::make_shared<std::string>();
        auto image = std::make_shared<std::string>();
        sub->add_option("--checkpoint", *ckpt)->required();
        sub->add_option("--image", *image)->required();
        sub->callback([=, this] {
            action_ = [=, this] {
                const auto net = load_network(*ckpt);
                const double p = classify_window(net, network_view(net, load_image(*image)));
                emit({{"class", p >= 0.5 ? "Sick" : "Healthy"}, {"p_sick", p}});
            };
        });
    }

    void add_heatmap(CLI::App& app) {
        auto* sub = command(app, "heatmap", "sliding-window sick-probability map");
        auto ckpt = std::make_shared<std::string>();
        auto image = std::make_shared<std::string>();
        auto stride = std::make_shared<std::size_t>(kDefaultStride);
        auto window = std::make_shared<std::size_t>(0);
        auto opacity = std::make_shared<double>(0.5);
        sub->add_option("--checkpoint", *ckpt)->required();
        sub->add_option("--image", *image)->required();
        sub->add_option("--stride", *stride)->capture_default_str()->check(CLI::PositiveNumber);
        sub->add_option("--window", *window, "window extent (default: the network input)");
        sub->add_option("--opacity", *opacity)->capture_default_str()->check(CLI::Range(0.0, 1.0));
        sub->callback([=, this] {
            action_ = [=, this] {
                const auto net = load_network(*ckpt);
                const auto img = load_image(*image);
                const std::size_t w = *window ? *window : net.spec().input.height;
                const auto hm = sliding_window_classify(net, img, w, *stride);
                save_raw(hm.grid, common_.out / "heatmap.f32", hm.sidecar_json());
                save_rgb_png(overlay_encode(display_range(img), heatmap_to_image(hm), *opacity),
                             common_.out / "heatmap_overlay.png");
                std::vector<float> grid = hm.grid.values();
                emit({{"rows", hm.grid.dim(0)}, {"cols", hm.grid.dim(1)}, {"window", w}, {"stride", *stride},
                      {"p_sick", grid}, {"grid", (common_.out / "heatmap.f32").string()},
                      {"overlay", (common_.out / "heatmap_overlay.png").string()}});
            };
        });
    }

    void add_gradcam(CLI::App& app) {
        auto* sub = command(app, "gradcam", "Grad-CAM map for one image");
        auto ckpt = std::make_shared<std::string>();
        auto image = std::make_shared<std::string>();
        auto manifest = std::make_shared<std::string>();
        auto cls = std::make_shared<int>(kSickClass);
        auto layer = std::make_shared<std::string>(kGradCamLayer);
        auto opacity = std::make_shared<double>(0.5);
        sub->add_option("--checkpoint", *ckpt)->required();
        sub->add_option("--image", *image)->required();
        sub->add_option("--class", *cls, "target class (0 Healthy, 1 Sick)")->capture_default_str()->check(CLI::Range(0, 1));
        sub->add_option("--layer", *layer)->capture_default_str();
        sub->add_option("--manifest", *manifest, "average weights over this manifest's images of the class");
        sub->add_option("--opacity", *opacity)->capture_default_str()->check(CLI::Range(0.0, 1.0));
        sub->callback([=, this] {
            action_ = [=, this] {
                const auto net = load_network(*ckpt);
                const auto view = network_view(net, load_image(*image));
                const auto gc = gradcam(net, variance_normalize(view), *cls, *layer);
                auto alpha = gc.weights.alpha;
                std::size_t ensemble = 0;
                if (!manifest->empty()) {
                    std::vector<GradCamWeights> ws;
                    std::vector<int> classes;
                    for (const auto& it : load_labeled(*manifest)) {
                        if (it.label != *cls) continue;
                        ws.push_back(gradcam_weights(net, center_crop(it.image, net.spec().input, true), *cls, *layer));
                        classes.push_back(it.label);
                    }
                    const auto ens = ensemble_weights(ws, classes, *cls);
                    alpha = ens.alpha;
                    ensemble = ens.count;
                }
                const auto map = gradcam_map(gc.features, alpha);
                const auto up = bilinear_upsample(map, view.dim(0), view.dim(1));
                json side{{"layer", *layer}, {"class", *cls}, {"ensemble_images", ensemble}};
                save_raw(map, common_.out / "gradcam.f32", side.dump());
                save_rgb_png(overlay_encode(display_range(view), display_range(up), *opacity),
                             common_.out / "gradcam_overlay.png");
                emit({{"layer", *layer}, {"class", *cls}, {"ensemble_images", ensemble},
                      {"map_rows", map.dim(0)}, {"map_cols", map.dim(1)},
                      {"map", (common_.out / "gradcam.f32").string()},
                      {"overlay", (common_.out / "gradcam_overlay.png").string()}});
            };
        });
    }

    void add_classmodel(CLI::App& app) {
        auto* sub = command(app, "classmodel", "class-model visualization by regularized gradient ascent");
        auto ckpt = std::make_shared<std::string>();
        auto cls = std::make_shared<int>(kSickClass);
        auto cfg = std::make_shared<ClassModelConfig>();
        auto init = std::make_shared<std::string>();
        sub->add_option("--checkpoint", *ckpt)->required();
        sub->add_option("--class", *cls)->capture_default_str()->check(CLI::Range(0, 1));
        sub->add_option("--iterations", cfg->iterations)->capture_default_str();
        sub->add_option("--epsilon", cfg->epsilon)->capture_default_str();
        sub->add_option("--lambda1", cfg->lambda1)->capture_default_str();
        sub->add_option("--lambda2", cfg->lambda2)->capture_default_str();
        sub->add_option("--snapshot-every", cfg->snapshot_every)->capture_default_str();
        sub->add_flag("--add-laplacian", cfg->add_laplacian, "use +lambda2 lap(I) instead of the published sign");
        sub->add_option("--init-image", *init, "start from this image instead of zeros");
        sub->callback([=, this] {
            action_ = [=, this] {
                const auto net = load_network(*ckpt);
                if (!init->empty()) {
                    cfg->init = ClassModelConfig::Init::Image;
                    cfg->init_image = center_crop(load_image(*init), net.spec().input, true);
                }
                const auto res = class_model(net, *cls, *cfg);
                const auto img = res.image.cast<float>();
                save_raw(img, common_.out / "class_model.f32", json{{"class", *cls}}.dump());
                save_display(img, common_.out / "class_model.png");
                json snaps = json::array();
                for (const auto& s : res.snapshots) {
                    const auto name = "class_model_" + std::to_string(s.iteration) + ".png";
                    save_display(s.image.cast<float>(), common_.out / name);
                    snaps.push_back(name);
                }
                const auto probs = net.predict(img).probs;
                emit({{"class", *cls}, {"iterations", cfg->iterations}, {"p_class", probs[static_cast<std::size_t>(*cls)]},
                      {"image", (common_.out / "class_model.png").string()}, {"snapshots", snaps}});
            };
        });
    }

    void add_bootstrap(CLI::App& app) {
        auto* sub = command(app, "bootstrap", "virtual-batch accuracy with a BCa interval", true);
        auto file = std::make_shared<std::string>();
        auto batches = std::make_shared<std::size_t>(100);
        auto per_class = std::make_shared<std::size_t>(10);
        auto resamples = std::make_shared<std::size_t>(kDefaultResamples);
        auto level = std::make_shared<double>(0.95);
        auto percentile = std::make_shared<bool>(false);
        sub->add_option("--classifications", *file, "JSON-lines from eval or train")->required();
        sub->add_option("--batches", *batches)->capture_default_str();
        sub->add_option("--per-class", *per_class)->capture_default_str();
        sub->add_option("--resamples", *resamples)->capture_default_str();
        sub->add_option("--level", *level)->capture_default_str()->check(CLI::Range(0.5, 0.9999));
        sub->add_flag("--percentile", *percentile, "plain percentile interval instead of BCa");
        sub->callback([=, this] {
            action_ = [=, this] {
                const auto items = read_classifications(*file);
                const auto acc = batch_accuracies(make_virtual_batches(items, *batches, common_.seed, *per_class));
                const auto r = *percentile ? bootstrap_percentile(acc, *resamples, *level, common_.seed)
                                           : bootstrap_bca(acc, *resamples, *level, common_.seed);
                auto j = json::parse(to_json(r));
                j["method"] = *percentile ? "percentile" : "bca";
                j["batches"] = *batches;
                emit(j);
            };
        });
    }

    void add_concordance(CLI::App& app) {
        auto* sub = command(app, "concordance", "annotator concordance and the ambiguity chain");
        auto log = std::make_shared<std::string>();
        auto d = std::make_shared<std::size_t>(0);
        auto n = std::make_shared<std::size_t>(0);
        auto* log_opt = sub->add_option("--log", *log, "annotations.jsonl");
        auto* d_opt = sub->add_option("--disagreements", *d);
        auto* n_opt = sub->add_option("--overlaps", *n);
        d_opt->needs(n_opt);
        n_opt->needs(d_opt);
        log_opt->excludes(d_opt)->excludes(n_opt);
        sub->callback([=, this] {
            if (log->empty() && !*n_opt) throw CLI::RequiredError("--log or --overlaps/--disagreements");
            action_ = [=, this] {
                if (!log->empty()) {
                    emit(json::parse(to_json(concordance_of(read_annotation_log(*log)))));
                } else {
                    emit(json::parse(to_json(ambiguity_chain(*d, *n))));
                }
            };
        });
    }

    void add_serve(CLI::App& app) {
        auto* sub = command(app, "serve", "run the annotation service", true);
        auto catalog = std::make_shared<std::string>();
        auto opts = std::make_shared<ServerOptions>();
        auto static_dir = std::make_shared<std::string>();
        sub->add_option("--catalog", *catalog, "sequence catalog (JSON-lines)")->required();
        sub->add_option("--host", opts->host)->capture_default_str();
        sub->add_option("--port", opts->port)->capture_default_str()->check(CLI::Range(0, 65535));
        sub->add_option("--train-fraction", opts->train_fraction)->capture_default_str();
        sub->add_option("--static", *static_dir, "UI bundle to serve at /");
        sub->callback([=, this] {
            action_ = [=, this] {
                opts->export_seed = common_.seed;
                opts->static_dir = *static_dir;
                AnnotationStore store(common_.out, read_catalog(*catalog), common_.seed);
                AnnotateServer server(store, *opts);
                const int port = server.bind();
                active_server() = &server;
                std::signal(SIGINT, [](int) { if (active_server()) active_server()->stop(); });
                std::signal(SIGTERM, [](int) { if (active_server()) active_server()->stop(); });
                emit({{"listening", "http://" + opts->host + ":" + std::to_string(port)},
                      {"sequences", store.size()}, {"log_dir", common_.out.string()}});
                server.run();
                active_server() = nullptr;
            };
        });
    }

    static AnnotateServer*& active_server() {
        static AnnotateServer* s = nullptr;
        return s;
    }
};

}  // namespace

int main(int argc, char** argv) { return Runner(argc, argv).run(); }
