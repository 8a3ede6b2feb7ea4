#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/stl.h>
#include <pybind11/pybind11.h>

#include "fearec/checkpoint.hpp"
#include "fearec/data.hpp"
#include "fearec/encoder.hpp"
#include "fearec/eval.hpp"
#include "fearec/losses.hpp"
#include "fearec/ramp.hpp"
#include "fearec/spectral.hpp"
#include "fearec/training.hpp"

namespace py = pybind11;
using namespace fearec;

namespace {

struct PyModel {
  ModelConfig config;
  ModelParams params;

  std::vector<double> scores(const std::vector<int>& seq) const {
    return encoder::score_items(config, params, data::pad_truncate(seq, config.max_len));
  }
  Matrix encode(const std::vector<int>& seq) const {
    return encoder::encode_eval(config, params, data::pad_truncate(seq, config.max_len));
  }
  py::list delays(const std::vector<int>& seq) const {
    std::vector<encoder::LayerTrace> traces;
    encoder::encode_eval(config, params, data::pad_truncate(seq, config.max_len), &traces);
    py::list layers;
    for (const auto& t : traces) {
      py::list heads;
      for (const auto& h : t.delays) {
        py::list pairs;
        for (const auto& d : h) pairs.append(py::make_tuple(d.lag, d.weight));
        heads.append(pairs);
      }
      layers.append(heads);
    }
    return layers;
  }
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "fearec C++ core";

  m.def("rfft", [](const std::vector<double>& x) { return spectral::rfft(x).coeffs; }, py::arg("x"));
  m.def(
      "irfft",
      [](const std::vector<spectral::Complex>& coeffs, std::size_t n) {
        return spectral::irfft(spectral::HalfSpectrum{coeffs, n});
      },
      py::arg("coeffs"), py::arg("n"));
  m.def(
      "cross_correlation_fft",
      [](const std::vector<double>& q, const std::vector<double>& k) { return spectral::cross_correlation_fft(q, k).scores; },
      py::arg("q"), py::arg("k"), "scores[tau - 1] for tau = 1..N");
  m.def(
      "brute_cross_correlation",
      [](const std::vector<double>& q, const std::vector<double>& k) { return spectral::brute_cross_correlation(q, k).scores; },
      py::arg("q"), py::arg("k"));

  py::class_<ramp::Band>(m, "Band")
      .def_readonly("start", &ramp::Band::start)
      .def_readonly("end", &ramp::Band::end)
      .def_readonly("layer", &ramp::Band::layer)
      .def("__repr__", [](const ramp::Band& b) {
        return "Band(layer=" + std::to_string(b.layer) + ", start=" + std::to_string(b.start) +
               ", end=" + std::to_string(b.end) + ")";
      });
  m.def(
      "ramp_bands",
      [](std::size_t layers, std::size_t spectrum_length, double alpha) {
        const ramp::RampSchedule s(layers, spectrum_length, alpha);
        std::vector<ramp::Band> out;
        for (std::size_t l = 1; l <= layers; ++l) out.push_back(s.band_for_layer(l));
        return out;
      },
      py::arg("layers"), py::arg("spectrum_length"), py::arg("alpha"));

  m.def(
      "rec_loss", [](const std::vector<double>& logits, int target) { return losses::rec_loss(logits, target); },
      py::arg("logits"), py::arg("target"));
  m.def(
      "contrastive_loss",
      [](const Matrix& a, const Matrix& b, double temperature) { return losses::contrastive_loss(a, b, temperature); },
      py::arg("views_a"), py::arg("views_b"), py::arg("temperature") = 1.0);
  m.def(
      "freq_reg_loss",
      [](const std::vector<double>& a, const std::vector<double>& b) { return losses::freq_reg_loss(a, b); },
      py::arg("a"), py::arg("b"));
  m.def(
      "grad_check",
      [](const std::string& which, std::uint64_t seed) {
        return training::grad_check(training::parse_grad_check_loss(which), seed).max_rel_error;
      },
      py::arg("loss") = "total", py::arg("seed") = 7);

  m.def(
      "rank_of_target",
      [](const std::vector<double>& logits, int target) { return eval::rank_of_target(logits, target); },
      py::arg("logits"), py::arg("target"));
  m.def(
      "metrics_from_ranks",
      [](const std::vector<std::size_t>& ranks, std::size_t n) {
        const auto r = eval::metrics_from_ranks(ranks, n);
        return py::make_tuple(r.hr, r.ndcg);
      },
      py::arg("ranks"), py::arg("n"));

  m.def(
      "synthetic_periodic",
      [](int users, int items, int period, int max_len, std::uint64_t seed) {
        return data::synthetic_periodic(users, items, period, max_len, seed).sequences;
      },
      py::arg("num_users"), py::arg("num_items"), py::arg("period"), py::arg("max_len"), py::arg("seed"));

  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("num_items", &ModelConfig::num_items)
      .def_readwrite("max_len", &ModelConfig::max_len)
      .def_readwrite("dim", &ModelConfig::dim)
      .def_readwrite("num_layers", &ModelConfig::num_layers)
      .def_readwrite("num_heads", &ModelConfig::num_heads)
      .def_readwrite("alpha", &ModelConfig::alpha)
      .def_readwrite("gamma", &ModelConfig::gamma)
      .def_readwrite("topk_scale", &ModelConfig::topk_scale)
      .def_readwrite("dropout", &ModelConfig::dropout)
      .def_readwrite("causal_mask", &ModelConfig::causal_mask)
      .def("validate", &ModelConfig::validate)
      .def("top_k", &ModelConfig::top_k);

  py::class_<PyModel>(m, "Model")
      .def(py::init([](const ModelConfig& cfg, std::uint64_t seed) {
             cfg.validate();
             return PyModel{cfg, ModelParams::initialize(cfg, seed)};
           }),
           py::arg("config"), py::arg("seed") = 0)
      .def_static(
          "load",
          [](const std::string& path) {
            auto ck = load_checkpoint(path);
            return PyModel{ck.config, std::move(ck.params)};
          },
          py::arg("path"))
      .def("save", [](const PyModel& self, const std::string& path) { save_checkpoint(path, self.config, self.params); })
      .def_readonly("config", &PyModel::config)
      .def("scores", &PyModel::scores, py::arg("sequence"), "logits over item ids 0..|I| (0 is padding)")
      .def("encode", &PyModel::encode, py::arg("sequence"), "final hidden states [N x D]")
      .def("delays", &PyModel::delays, py::arg("sequence"), "per layer, per head list of (lag, weight)")
      .def("parameter_count", [](const PyModel& self) { return self.params.parameter_count(); });
}
