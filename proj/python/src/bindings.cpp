#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "deadnet/augment.hpp"
#include "deadnet/dataset.hpp"
#include "deadnet/heatmap.hpp"
#include "deadnet/interpret.hpp"
#include "deadnet/model.hpp"
#include "deadnet/stats.hpp"
#include "deadnet/trainer.hpp"
#include "deadnet/version.hpp"

namespace py = pybind11;
using namespace deadnet;

namespace {

using Array = py::array_t<float, py::array::c_style | py::array::forcecast>;

// (h, w) arrays become h x w x 1 images
Tensor to_tensor(const Array& a) {
    Shape shape(a.shape(), a.shape() + a.ndim());
    if (shape.size() == 2) shape.push_back(1);
    return Tensor(shape, std::vector<float>(a.data(), a.data() + a.size()));
}

template <typename T>
py::array_t<T> to_array(const BasicTensor<T>& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<T> out(shape);
    std::copy(t.data().begin(), t.data().end(), out.mutable_data());
    return out;
}

py::dict to_dict(const BootstrapResult& r) {
    py::dict d;
    d["estimate"] = r.estimate;
    d["lower"] = r.lower;
    d["upper"] = r.upper;
    d["level"] = r.level;
    d["resamples"] = r.resamples;
    d["z0"] = r.z0;
    d["acceleration"] = r.acceleration;
    return d;
}

Label label_arg(const std::string& s) {
    if (s == "healthy" || s == "Healthy") return Label::Healthy;
    if (s == "sick" || s == "Sick") return Label::Sick;
    throw py::value_error("label must be healthy or sick, got '" + s + "'");
}

}  // namespace

PYBIND11_MODULE(_deadnet, m) {
    m.doc() = "DeadNet core: network inference, interpretation, augmentation and statistics";
    m.attr("__version__") = std::string(kVersion);

    // translators run newest first, so the base class goes in first
    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);

    m.def("deadnet_shapes", [](std::size_t input) {
        py::list out;
        for (const auto& s : NetworkSpec::deadnet(input).shapes())
            out.append(py::make_tuple(s.name, py::make_tuple(s.in.height, s.in.width, s.in.channels),
                                      py::make_tuple(s.out.height, s.out.width, s.out.channels)));
        return out;
    }, py::arg("input") = 220, "(name, in, out) per layer of the DeadNet architecture");

    py::class_<Network>(m, "Network")
        .def(py::init([](std::size_t input, std::uint64_t seed) {
                 Network net(NetworkSpec::deadnet(input));
                 xavier_init(net, seed);
                 return net;
             }),
             py::arg("input") = 64, py::arg("seed") = 1)
        .def_property_readonly("input", [](const Network& n) { return n.spec().input.height; })
        .def("parameter_count", &Network::parameter_count)
        .def("predict", [](const Network& n, const Array& images) {
            return to_array(n.predict(to_tensor(images)).probs);
        }, py::arg("images"), "class probabilities for an image or an n x h x w x c batch")
        .def("classify", [](const Network& n, const Array& image) {
            return classify_window(n, to_tensor(image));
        }, py::arg("image"), "sick-class probability of one variance-normalized window")
        .def("save", [](const Network& n, const std::filesystem::path& p) { save_checkpoint(n, p); });

    m.def("load_checkpoint", [](const std::filesystem::path& p) { return load_checkpoint(p).network; });

    m.def("sliding_window_classify", [](const Network& n, const Array& image, std::size_t stride) {
        auto hm = sliding_window_classify(n, to_tensor(image), n.spec().input.height, stride);
        return to_array(hm.grid);
    }, py::arg("network"), py::arg("image"), py::arg("stride") = kDefaultStride);

    m.def("gradcam", [](const Network& n, const Array& image, int target_class, const std::string& layer) {
        auto gc = gradcam(n, to_tensor(image), target_class, layer);
        auto map = gradcam_map(gc.features, gc.weights.alpha);
        return py::make_tuple(to_array(map), gc.weights.alpha);
    }, py::arg("network"), py::arg("image"), py::arg("target_class") = 1,
       py::arg("layer") = std::string(kGradCamLayer), "(relu map, alpha)");

    m.def("class_model", [](const Network& n, int target_class, std::size_t iterations, double epsilon,
                            double lambda1, double lambda2) {
        ClassModelConfig cfg;
        cfg.iterations = iterations;
        cfg.epsilon = epsilon;
        cfg.lambda1 = lambda1;
        cfg.lambda2 = lambda2;
        cfg.snapshot_every = 0;
        return to_array(class_model(n, target_class, cfg).image);
    }, py::arg("network"), py::arg("target_class") = 1, py::arg("iterations") = 500, py::arg("epsilon") = 10.0,
       py::arg("lambda1") = 0.01, py::arg("lambda2") = 0.001);

    m.def("generate_synthetic", [](const std::string& label, std::size_t count, std::uint64_t seed,
                                   bool quadrant) {
        SyntheticSpec spec;
        spec.seed = seed;
        spec.sick_region = quadrant ? SickRegion::Quadrant : SickRegion::Whole;
        py::list out;
        for (auto& s : generate_synthetic(spec, label_arg(label), count)) {
            py::dict meta;
            meta["path"] = s.record.path;
            meta["stage_position"] = s.record.stage_position;
            meta["quadrant"] = s.quadrant;
            out.append(py::make_tuple(to_array(s.image), meta));
        }
        return out;
    }, py::arg("label"), py::arg("count"), py::arg("seed") = 1, py::arg("quadrant") = false);

    m.def("tps_warp", [](const Array& image, const Array& displacements, std::size_t interval) {
        return to_array(tps_warp(to_tensor(image), to_tensor(displacements), interval));
    }, py::arg("image"), py::arg("displacements"), py::arg("interval") = 128);
    m.def("gaussian_blur", [](const Array& image, double sigma) {
        return to_array(gaussian_blur(to_tensor(image), sigma));
    }, py::arg("image"), py::arg("sigma"));
    m.def("dihedral8", [](const Array& image) {
        py::list out;
        for (const auto& t : dihedral8(to_tensor(image))) out.append(to_array(t));
        return out;
    });
    m.def("variance_normalize", [](const Array& image) { return to_array(variance_normalize(to_tensor(image))); });

    m.def("bootstrap_bca", [](const std::vector<double>& values, std::size_t resamples, double level,
                              std::uint64_t seed) {
        return to_dict(bootstrap_bca(values, resamples, level, seed));
    }, py::arg("values"), py::arg("resamples") = kDefaultResamples, py::arg("level") = 0.95, py::arg("seed") = 0);

    m.def("ambiguity_chain", [](std::size_t disagreements, std::size_t overlaps) {
        auto r = ambiguity_chain(disagreements, overlaps);
        py::dict d;
        d["overlaps"] = r.overlaps;
        d["disagreements"] = r.disagreements;
        d["d"] = r.d;
        d["a"] = r.a;
        d["r"] = r.r;
        d["u"] = r.u;
        return d;
    });

    m.def("inv_lr", [](std::uint64_t iter, double base_lr, double gamma, double power) {
        TrainConfig cfg;
        cfg.base_lr = base_lr;
        cfg.lr_gamma = gamma;
        cfg.lr_power = power;
        return inv_lr(iter, cfg);
    }, py::arg("iteration"), py::arg("base_lr") = 3e-4, py::arg("gamma") = 1e-4, py::arg("power") = 0.75);
}
