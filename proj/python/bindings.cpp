#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "iwn/attacks.hpp"
#include "iwn/data_io.hpp"
#include "iwn/dct_codec.hpp"
#include "iwn/error.hpp"
#include "iwn/harness.hpp"
#include "iwn/metrics.hpp"
#include "iwn/trainer.hpp"

namespace py = pybind11;
using namespace iwn;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// Python side uses height x width x channels arrays; the core is planar.
Image to_core(const Array& a) {
  if (a.ndim() != 3 && a.ndim() != 2) throw Error(ErrorKind::ShapeMismatch, "expected an HxW or HxWxC array");
  const int h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
  const int c = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
  Image img(h, w, c);
  const double* p = a.data();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int k = 0; k < c; ++k) img.at(k, y, x) = p[(static_cast<std::size_t>(y) * w + x) * c + k];
  return img;
}

Array to_numpy(const Image& img) {
  Array out({img.height(), img.width(), img.channels()});
  double* p = out.mutable_data();
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int k = 0; k < img.channels(); ++k)
        p[(static_cast<std::size_t>(y) * img.width() + x) * img.channels() + k] = img.at(k, y, x);
  return out;
}

AttackKind attack_kind(const std::string& name) {
  const auto k = parse_attack_kind(name);
  if (!k) throw Error(ErrorKind::UnsupportedKind, "unknown attack kind '" + name + "'");
  return *k;
}

Variant variant_of(const std::string& name) {
  const auto v = parse_variant(name);
  if (!v) throw Error(ErrorKind::InvalidConfig, "unknown variant '" + name + "'");
  return *v;
}

py::dict loss_dict(const LossBreakdown& l) {
  py::dict d;
  d["l_rec"] = l.l_rec;
  d["l_idem"] = l.l_idem;
  d["l_tight"] = l.l_tight;
  d["l_wm"] = l.l_wm;
  d["l_origin"] = l.l_origin;
  d["total"] = l.total;
  return d;
}

struct PyModel {
  Checkpoint ckpt;
  Model model;

  explicit PyModel(Checkpoint c) : ckpt(std::move(c)), model(model_from_checkpoint(ckpt)) {}
};

}  // namespace

PYBIND11_MODULE(_iwn, m) {
  m.doc() = "DCT watermarking and idempotent restoration network";

  static py::exception<Error> error(m, "IwnError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = error;
      py::object instance = exc(e.what());
      instance.attr("kind") = std::string(to_string(e.kind()));
      PyErr_SetObject(error.ptr(), instance.ptr());
    }
  });

  m.def("load_image", [](const std::filesystem::path& path, int height, int width) {
    return to_numpy(load_image(path, {height, width}));
  }, py::arg("path"), py::arg("height") = kModelImageSize, py::arg("width") = kModelImageSize,
        "Read an image as an HxWx3 float array in [0, 1], resampled to the given size.");
  m.def("save_image", [](const Array& img, const std::filesystem::path& path) { save_image(to_core(img), path); },
        py::arg("image"), py::arg("path"));

  m.def("dct2", [](const Array& plane) {
    if (plane.ndim() != 2) throw Error(ErrorKind::ShapeMismatch, "dct2 takes a 2-D plane");
    const int rows = static_cast<int>(plane.shape(0)), cols = static_cast<int>(plane.shape(1));
    const auto s = dct2({plane.data(), static_cast<std::size_t>(plane.size())}, rows, cols);
    Array out({rows, cols});
    std::copy(s.coeffs.begin(), s.coeffs.end(), out.mutable_data());
    return out;
  }, py::arg("plane"));
  m.def("idct2", [](const Array& coeffs) {
    if (coeffs.ndim() != 2) throw Error(ErrorKind::ShapeMismatch, "idct2 takes a 2-D plane");
    const int rows = static_cast<int>(coeffs.shape(0)), cols = static_cast<int>(coeffs.shape(1));
    SpectralPlane s{rows, cols, TransformKind::Dct, {coeffs.data(), coeffs.data() + coeffs.size()}};
    const auto v = idct2(s);
    Array out({rows, cols});
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
  }, py::arg("coeffs"));

  m.def("embed", [](const Array& x, const Array& w, double alpha) {
    double clipped = 0.0;
    auto x_w = to_numpy(embed(to_core(x), to_core(w), {alpha}, &clipped));
    return py::make_tuple(x_w, clipped);
  }, py::arg("x"), py::arg("w"), py::arg("alpha") = 0.1, "Returns (x_w, clipped_fraction).");
  m.def("extract", [](const Array& x_w, const Array& x, double alpha) {
    return to_numpy(extract(to_core(x_w), to_core(x), {alpha}));
  }, py::arg("x_w"), py::arg("x"), py::arg("alpha") = 0.1);

  m.def("attack_names", [] {
    std::vector<std::string> names;
    for (auto k : kAllAttacks) names.emplace_back(to_string(k));
    return names;
  });
  m.def("apply_attack", [](const Array& img, const std::string& kind, std::uint64_t seed) {
    return to_numpy(apply_attack(to_core(img), AttackSpec::standard(attack_kind(kind), seed)));
  }, py::arg("image"), py::arg("kind"), py::arg("seed") = 0);

  m.def("psnr", [](const Array& a, const Array& b) { return psnr(to_core(a), to_core(b)); }, py::arg("a"), py::arg("b"));
  m.def("ssim", [](const Array& a, const Array& b, bool global) {
    SsimOptions o;
    o.global = global;
    return ssim(to_core(a), to_core(b), o);
  }, py::arg("a"), py::arg("b"), py::arg("global_stats") = false);

  m.def("count_parameters", [](const std::string& variant) {
    return count_parameters(ModelConfig::for_variant(variant_of(variant)));
  }, py::arg("variant"));

  py::class_<PyModel>(m, "Model")
      .def_static("build", [](const std::string& variant, std::uint64_t seed) {
        return PyModel(make_checkpoint(build_model(ModelConfig::for_variant(variant_of(variant)), seed), {}));
      }, py::arg("variant") = "origin", py::arg("seed") = 0)
      .def_static("load", [](const std::filesystem::path& path) { return PyModel(load_checkpoint(path)); },
                  py::arg("path"))
      .def("save", [](const PyModel& self, const std::filesystem::path& path) { save_checkpoint(self.ckpt, path); },
           py::arg("path"))
      .def("forward", [](const PyModel& self, const Array& img) { return to_numpy(forward(self.model, to_core(img))); },
           py::arg("image"))
      .def("project", [](const PyModel& self, const Array& img, int n) {
        return to_numpy(project_n(self.model, to_core(img), n));
      }, py::arg("image"), py::arg("n"))
      .def_property_readonly("variant", [](const PyModel& self) { return std::string(to_string(self.model.config().variant)); })
      .def_property_readonly("parameter_count", [](const PyModel& self) { return count_parameters(self.model); })
      .def_property_readonly("step", [](const PyModel& self) { return self.model.step(); })
      .def_property_readonly("loss_history", [](const PyModel& self) {
        py::list out;
        for (const auto& l : self.ckpt.meta.loss_history) out.append(loss_dict(l));
        return out;
      });

  m.def("train", [](const Array& x, const Array& w, const std::string& variant, int epochs, int duplication,
                    double learning_rate, double alpha, std::uint64_t seed, bool record_stability) {
    TrainConfig cfg;
    cfg.model = ModelConfig::for_variant(variant_of(variant));
    cfg.epochs = epochs;
    cfg.duplication = duplication;
    cfg.learning_rate = learning_rate;
    cfg.alpha = alpha;
    cfg.master_seed = seed;
    cfg.record_stability = record_stability;
    const Image xi = to_core(x), wi = to_core(w);
    TrainResult r;
    {
      py::gil_scoped_release release;
      r = train(xi, wi, cfg);
    }
    return PyModel(std::move(r.checkpoint));
  }, py::arg("x"), py::arg("w"), py::arg("variant") = "origin", py::arg("epochs") = 10, py::arg("duplication") = 1200,
        py::arg("learning_rate") = 1e-4, py::arg("alpha") = 0.1, py::arg("seed") = 0, py::arg("record_stability") = false,
        "Train on one (host, watermark) pair and return the final model.");

  m.def("evaluate", [](const PyModel& model, const Array& x, const Array& w, double alpha, std::vector<int> projections,
                       std::vector<std::uint64_t> seeds) {
    AttackSuiteConfig cfg;
    cfg.embed.alpha = alpha;
    cfg.projections = std::move(projections);
    cfg.seeds = std::move(seeds);
    const auto report = run_attack_suite(model.model, to_core(x), to_core(w), cfg);
    py::list rows;
    for (const auto& r : report.rows) {
      py::dict d;
      d["attack"] = std::string(to_string(r.attack));
      d["projections"] = r.projections;
      d["seed"] = r.seed;
      d["psnr_wm"] = r.psnr_wm;
      d["ssim_wm"] = r.ssim_wm;
      d["psnr_img"] = r.psnr_img;
      d["ssim_img"] = r.ssim_img;
      rows.append(d);
    }
    return rows;
  }, py::arg("model"), py::arg("x"), py::arg("w"), py::arg("alpha") = 0.1,
        py::arg("projections") = std::vector<int>{1, 5, 10, 30}, py::arg("seeds") = std::vector<std::uint64_t>{0});
}
