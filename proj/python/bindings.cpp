// Copyright 2026 The lbscan Authors.
// SPDX-License-Identifier: Apache-2.0

// Python bindings. Arrays cross the boundary as float64 NumPy arrays (copied);
// configs cross as dicts of strings in the key=value config vocabulary.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lbscan/checkpoint.hpp"
#include "lbscan/config.hpp"
#include "lbscan/cost_model.hpp"
#include "lbscan/engine.hpp"
#include "lbscan/erf.hpp"
#include "lbscan/errors.hpp"
#include "lbscan/harness.hpp"
#include "lbscan/model.hpp"
#include "lbscan/oracle.hpp"
#include "lbscan/synthdata.hpp"
#include "lbscan/train.hpp"

namespace py = pybind11;
using namespace lbscan;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

TensorD to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return TensorD(std::move(shape), std::vector<double>(a.data(), a.data() + a.size()));
}

template <class T>
Array to_array(const Tensor<T>& t) {
  Array out(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
  double* dst = out.mutable_data();
  for (std::size_t i = 0; i < t.size(); ++i) dst[i] = static_cast<double>(t[i]);
  return out;
}

ScanParams<double> params(const Array& abar, const Array& bx, const Array& c, const Array& dx) {
  return {to_tensor(abar), to_tensor(bx), to_tensor(c), to_tensor(dx)};
}

py::dict cost_dict(const CostReport& r) {
  py::dict d;
  d["variant"] = std::string(to_string(r.variant));
  d["flops"] = r.flops;
  d["hbm_reads"] = r.hbm_reads;
  d["hbm_writes"] = r.hbm_writes;
  d["hbm_elems"] = r.hbm_elems();
  d["tile_exchanges"] = r.tile_exchanges;
  d["register_ops"] = r.register_ops;
  return d;
}

template <class T>
py::dict output_dict(const ScanOutput<T>& o) {
  py::dict d;
  d["y"] = to_array(o.y);
  d["h_final"] = to_array(o.h_final);
  d["cost"] = cost_dict(o.cost);
  return d;
}

engine::TilePlan plan_for(std::size_t L, std::size_t tile_len) {
  return tile_len == 0 ? engine::TilePlan::automatic(L) : engine::TilePlan::make(L, tile_len);
}

// Runs one engine variant at the requested precision. Single precision rounds
// the inputs to float first.
py::dict run_scan(Variant v, const ScanParams<double>& pf, const ScanParams<double>* pb,
                  std::size_t tile_len, std::size_t workers, const std::string& precision) {
  pf.validate();
  const engine::TilePlan plan = plan_for(pf.abar.dim(1), tile_len);
  const engine::ScanEngine eng(workers);
  auto run = [&](const auto& f, const auto* b) {
    switch (v) {
      case Variant::forward: return output_dict(eng.forward(f, plan));
      case Variant::lbm: return output_dict(eng.lbm(f, plan));
      case Variant::global_bidir: return output_dict(eng.global_bidir(f, *b, plan));
    }
    throw std::invalid_argument("unknown variant");
  };
  if (precision == "double") return run(pf, pb);
  if (precision != "single") throw std::invalid_argument("precision must be 'single' or 'double'");
  const ScanParams<float> ff = pf.cast<float>();
  const ScanParams<float> fb = pb ? pb->cast<float>() : ScanParams<float>{};
  return run(ff, pb ? &fb : nullptr);
}

ModelConfig config_from_dict(const std::map<std::string, std::string>& kv) {
  ModelConfig c = ModelConfig::from_key_values(KeyValues(kv.begin(), kv.end()));
  c.validate();
  return c;
}

py::dict weights_dict(const ModelWeights& w) {
  py::dict d;
  w.for_each([&](const std::string& name, const TensorD& t) { d[py::str(name)] = to_array(t); });
  return d;
}

void set_weights(Model& m, const py::dict& d) {
  m.weights.for_each([&](const std::string& name, TensorD& t) {
    if (!d.contains(name)) return;
    TensorD v = to_tensor(d[py::str(name)].cast<Array>());
    if (v.shape() != t.shape()) throw ShapeError("weight '" + name + "' has the wrong shape");
    t = std::move(v);
  });
}

std::vector<std::uint32_t> labels_of(const py::array_t<std::uint32_t, py::array::forcecast>& a) {
  return std::vector<std::uint32_t>(a.data(), a.data() + a.size());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Locally bi-directional selective scan: engine, oracle, model and tools";

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<NonFiniteError>(m, "NonFiniteError", PyExc_ValueError);
  py::register_exception<RangeError>(m, "RangeError", PyExc_IndexError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_IOError);

  // Scans. Shapes: abar, bx (B, L, E, N); c (B, L, N); dx (B, L, E).
  m.def(
      "forward_scan",
      [](const Array& abar, const Array& bx, const Array& c, const Array& dx,
         std::size_t tile_len, std::size_t workers, const std::string& precision) {
        return run_scan(Variant::forward, params(abar, bx, c, dx), nullptr, tile_len, workers,
                        precision);
      },
      py::arg("abar"), py::arg("bx"), py::arg("c"), py::arg("dx"), py::arg("tile_len") = 0,
      py::arg("workers") = 1, py::arg("precision") = "double");
  m.def(
      "lbm_scan",
      [](const Array& abar, const Array& bx, const Array& c, const Array& dx,
         std::size_t tile_len, std::size_t workers, const std::string& precision) {
        return run_scan(Variant::lbm, params(abar, bx, c, dx), nullptr, tile_len, workers,
                        precision);
      },
      py::arg("abar"), py::arg("bx"), py::arg("c"), py::arg("dx"), py::arg("tile_len") = 0,
      py::arg("workers") = 1, py::arg("precision") = "double");
  m.def(
      "global_bidir_scan",
      [](const py::tuple& fwd, const py::tuple& bwd, std::size_t tile_len, std::size_t workers,
         const std::string& precision) {
        const ScanParams<double> pf = params(fwd[0].cast<Array>(), fwd[1].cast<Array>(),
                                             fwd[2].cast<Array>(), fwd[3].cast<Array>());
        const ScanParams<double> pb = params(bwd[0].cast<Array>(), bwd[1].cast<Array>(),
                                             bwd[2].cast<Array>(), bwd[3].cast<Array>());
        return run_scan(Variant::global_bidir, pf, &pb, tile_len, workers, precision);
      },
      py::arg("forward_params"), py::arg("backward_params"), py::arg("tile_len") = 0,
      py::arg("workers") = 1, py::arg("precision") = "double");

  m.def(
      "forward_scan_ref",
      [](const Array& abar, const Array& bx, const Array& c, const Array& dx) {
        return output_dict(oracle::forward_scan_seq(params(abar, bx, c, dx)));
      },
      py::arg("abar"), py::arg("bx"), py::arg("c"), py::arg("dx"));
  m.def(
      "lbm_scan_ref",
      [](const Array& abar, const Array& bx, const Array& c, const Array& dx,
         std::size_t tile_len) {
        return output_dict(oracle::lbm_scan_seq(params(abar, bx, c, dx), tile_len));
      },
      py::arg("abar"), py::arg("bx"), py::arg("c"), py::arg("dx"), py::arg("tile_len"));

  m.def("select_tile_len", &engine::select_tile_len, py::arg("length"));
  m.def(
      "scan_cost",
      [](const std::string& variant, std::size_t batch, std::size_t length, std::size_t inner,
         std::size_t state, std::size_t tile_len, const std::string& form) {
        return cost_dict(cost::count_scan_cost(parse_variant(variant), batch, length, inner, state,
                                               tile_len, parse_kernel_form(form)));
      },
      py::arg("variant"), py::arg("batch"), py::arg("length"), py::arg("inner"),
      py::arg("state"), py::arg("tile_len"), py::arg("form") = "fused");
  m.def(
      "model_cost",
      [](const std::map<std::string, std::string>& config) {
        const cost::ModelCost mc = cost::count_model_cost(config_from_dict(config));
        py::dict d;
        d["embed_flops"] = mc.embed_flops;
        d["block_flops"] = mc.block_flops;
        d["scan_flops"] = mc.scan_flops;
        d["head_flops"] = mc.head_flops;
        d["total_flops"] = mc.total_flops();
        d["scan"] = cost_dict(mc.scan);
        return d;
      },
      py::arg("config"));

  // Oracle sweep; returns the number of failing grid points and the worst
  // relative error.
  m.def(
      "verify",
      [](std::vector<std::size_t> lengths, std::vector<std::size_t> tiles,
         std::vector<std::size_t> workers, std::uint64_t seed) {
        harness::VerifyConfig c;
        c.lengths = std::move(lengths);
        c.tiles = std::move(tiles);
        c.workers = std::move(workers);
        c.seed = seed;
        std::size_t failures = 0;
        double worst = 0.0;
        const auto rows = harness::run_verify(c);
        for (const auto& r : rows) {
          failures += r.pass ? 0 : 1;
          worst = std::max(worst, r.max_rel_error);
        }
        return py::make_tuple(rows.size(), failures, worst);
      },
      py::arg("lengths") = std::vector<std::size_t>{1, 5, 31, 128},
      py::arg("tiles") = std::vector<std::size_t>{1, 3, 4, 16},
      py::arg("workers") = std::vector<std::size_t>{1, 4}, py::arg("seed") = 1);

  m.def(
      "bench",
      [](std::size_t length, std::size_t tile_len, std::size_t workers, std::size_t reps,
         std::size_t batch, std::size_t inner, std::size_t state) {
        harness::BenchConfig c;
        c.length = length;
        c.tile_len = tile_len;
        c.workers = workers;
        c.reps = reps;
        c.batch = batch;
        c.inner = inner;
        c.state = state;
        py::list out;
        for (const auto& r : harness::run_bench(c)) {
          py::dict d = cost_dict(r.cost);
          d["L"] = r.length;
          d["M"] = r.tile_len;
          d["workers"] = r.workers;
          d["median_ns"] = r.median_ns;
          out.append(d);
        }
        return out;
      },
      py::arg("length") = 4096, py::arg("tile_len") = 0, py::arg("workers") = 4,
      py::arg("reps") = 20, py::arg("batch") = 16, py::arg("inner") = 256, py::arg("state") = 16);

  // Model.
  py::class_<Model>(m, "Model")
      .def(py::init([](const std::map<std::string, std::string>& config, std::uint64_t seed) {
             return make_model(config_from_dict(config), seed);
           }),
           py::arg("config") = std::map<std::string, std::string>{}, py::arg("seed") = 0)
      .def_property_readonly(
          "config",
          [](const Model& self) {
            const KeyValues kv = self.config.to_key_values();
            return std::map<std::string, std::string>(kv.begin(), kv.end());
          })
      .def_property_readonly("seq_len", [](const Model& self) { return self.config.seq_len(); })
      .def("weights", [](const Model& self) { return weights_dict(self.weights); })
      .def("set_weights", &set_weights, py::arg("weights"))
      .def(
          "forward",
          [](const Model& self, const Array& images, std::size_t workers) {
            return to_array(model_forward(self, to_tensor(images), workers));
          },
          py::arg("images"), py::arg("workers") = 1)
      .def(
          "backbone",
          [](const Model& self, const Array& images, std::size_t workers) {
            const BackboneOutput o = backbone(to_tensor(images), self, workers);
            return py::make_tuple(to_array(o.tokens), o.reversed);
          },
          py::arg("images"), py::arg("workers") = 1)
      .def(
          "save", [](const Model& self, const std::string& path) { io::save_checkpoint(path, self); },
          py::arg("path"))
      .def_static("load", &io::load_checkpoint, py::arg("path"))
      .def(
          "train",
          [](Model& self, const std::string& task, std::size_t steps, std::size_t batch,
             double lr, std::size_t warmup, std::uint64_t seed, std::size_t workers) {
            train::TrainConfig tc;
            tc.steps = steps;
            tc.batch = batch;
            tc.lr = lr;
            tc.warmup = warmup;
            py::list log;
            train::fit(
                self, tc,
                [&](std::size_t k) {
                  synth::Dataset d = synth::gen_task(task, 1000003ull * seed + k, batch);
                  return train::Batch{std::move(d.images), std::move(d.labels)};
                },
                [&](const train::LogRow& r) {
                  log.append(py::make_tuple(r.step, r.lr, r.loss, r.accuracy));
                },
                workers);
            return log;
          },
          py::arg("task"), py::arg("steps"), py::arg("batch") = 32, py::arg("lr") = 3e-3,
          py::arg("warmup") = 50, py::arg("seed") = 1, py::arg("workers") = 1)
      .def(
          "evaluate",
          [](const Model& self, const Array& images,
             const py::array_t<std::uint32_t, py::array::forcecast>& labels, std::size_t workers) {
            const std::vector<std::uint32_t> l = labels_of(labels);
            return train::evaluate(self, to_tensor(images), l, 64, workers);
          },
          py::arg("images"), py::arg("labels"), py::arg("workers") = 1)
      .def(
          "erf",
          [](const Model& self, const Array& images, py::object token, std::size_t workers) {
            const TensorD img = to_tensor(images);
            const erf::ErfMap e =
                token.is_none() ? erf::compute_erf(self, img, workers)
                                : erf::compute_erf(self, img, token.cast<std::size_t>(), workers);
            return py::make_tuple(to_array(e.raw), to_array(e.heat), e.token);
          },
          py::arg("images"), py::arg("token") = py::none(), py::arg("workers") = 1);

  m.def(
      "gen_task",
      [](const std::string& task, std::uint64_t seed, std::size_t n) {
        const synth::Dataset d = synth::gen_task(task, seed, n);
        py::array_t<std::uint32_t> labels(static_cast<py::ssize_t>(d.labels.size()));
        std::copy(d.labels.begin(), d.labels.end(), labels.mutable_data());
        return py::make_tuple(to_array(d.images), labels);
      },
      py::arg("task"), py::arg("seed"), py::arg("n"));

  m.attr("__version__") = "0.1.0";
}
