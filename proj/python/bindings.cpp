// Copyright 2026 The nsg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "nsg/algebra.hpp"
#include "nsg/dataset.hpp"
#include "nsg/enumerate.hpp"
#include "nsg/error.hpp"
#include "nsg/gradcheck_suite.hpp"
#include "nsg/hash.hpp"
#include "nsg/network.hpp"
#include "nsg/objective.hpp"
#include "nsg/trainer.hpp"

namespace py = pybind11;
using namespace nsg;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<Element> flatten_rows(const std::vector<std::vector<int>>& rows, int lo) {
  const std::size_t n = rows.size();
  std::vector<Element> cells;
  for (const auto& r : rows) {
    if (r.size() != n) throw DimensionMismatch("table rows must all have length n");
    for (int v : r) {
      if (v < lo || v > static_cast<int>(n)) {
        throw InvalidArgument("cell value " + std::to_string(v) + " out of range");
      }
      cells.push_back(static_cast<Element>(v));
    }
  }
  return cells;
}

CayleyTable table_from_rows(const std::vector<std::vector<int>>& rows) {
  return CayleyTable(rows.size(), flatten_rows(rows, 1));
}

PartialTable partial_from_rows(const std::vector<std::vector<std::optional<int>>>& rows) {
  std::vector<std::vector<int>> plain;
  for (const auto& r : rows) {
    std::vector<int> out;
    for (const auto& v : r) out.push_back(v.value_or(0));
    plain.push_back(std::move(out));
  }
  return PartialTable(rows.size(), flatten_rows(plain, 0));
}

std::vector<std::vector<int>> rows_of(std::span<const Element> cells, std::size_t n) {
  std::vector<std::vector<int>> rows(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) rows[i].push_back(cells[i * n + j]);
  return rows;
}

std::vector<double> cube_values(const Array& a) {
  return std::vector<double>(a.data(), a.data() + a.size());
}

std::size_t cube_order(const Array& a) {
  std::size_t n = 1;
  while (n * n * n < static_cast<std::size_t>(a.size())) ++n;
  if (n * n * n != static_cast<std::size_t>(a.size())) {
    throw DimensionMismatch("array size is not a cube n^3");
  }
  return n;
}

Array cube_array(std::size_t n, std::span<const double> values) {
  Array out({n, n, n});
  std::copy(values.begin(), values.end(), out.mutable_data());
  return out;
}

py::dict report_dict(const MetricsReport& r) {
  py::dict d;
  d["guess_rate"] = r.guess_rate;
  d["associative_rate"] = r.associative_rate;
  d["n_tables"] = r.n_tables;
  d["loss_name"] = r.loss_name;
  d["checkpoint_id"] = r.checkpoint_id;
  d["mask_fraction"] = r.mask_fraction;
  d["seed"] = r.seed;
  d["dataset_hash"] = r.dataset_hash;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Finite semigroup enumeration and neural Cayley table completion";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<DimensionMismatch>(m, "DimensionMismatch", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", error.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", error.ptr());

  py::class_<CayleyTable>(m, "CayleyTable")
      .def(py::init(&table_from_rows), py::arg("rows"))
      .def_property_readonly("n", &CayleyTable::size)
      .def("rows", [](const CayleyTable& t) { return rows_of(t.cells(), t.size()); })
      .def("__call__", [](const CayleyTable& t, int i, int j) {
        if (i < 1 || j < 1 || i > int(t.size()) || j > int(t.size()))
          throw py::index_error("element out of range");
        return int(t(static_cast<Element>(i), static_cast<Element>(j)));
      })
      .def("__eq__", [](const CayleyTable& a, const CayleyTable& b) { return a == b; })
      .def("__lt__", [](const CayleyTable& a, const CayleyTable& b) { return a < b; })
      .def("__hash__", [](const CayleyTable& t) { return TableHash{}(t); })
      .def("__str__", [](const CayleyTable& t) { return to_string(t); })
      .def("__repr__", [](const CayleyTable& t) { return "CayleyTable('" + to_string(t) + "')"; })
      .def(py::pickle([](const CayleyTable& t) { return rows_of(t.cells(), t.size()); },
                      [](const std::vector<std::vector<int>>& rows) { return table_from_rows(rows); }));

  py::class_<PartialTable>(m, "PartialTable")
      .def(py::init(&partial_from_rows), py::arg("rows"),
           "Rows of cell values; None or 0 marks an unknown cell.")
      .def_static("from_table", &PartialTable::from_table)
      .def_static("unknown", &PartialTable::unknown)
      .def_property_readonly("n", &PartialTable::size)
      .def("rows",
           [](const PartialTable& p) {
             std::vector<std::vector<std::optional<int>>> rows(p.size());
             for (std::size_t i = 0; i < p.size(); ++i)
               for (std::size_t j = 0; j < p.size(); ++j) {
                 const Element c = p.cells()[i * p.size() + j];
                 rows[i].push_back(c == kUnknown ? std::nullopt : std::optional<int>(c));
               }
             return rows;
           })
      .def("unknown_count", &PartialTable::unknown_count)
      .def("agrees_with", &PartialTable::agrees_with)
      .def("__eq__", [](const PartialTable& a, const PartialTable& b) { return a == b; });

  m.def("is_associative", &is_associative);
  m.def("opposite", &opposite);
  m.def(
      "relabel",
      [](const CayleyTable& t, const std::vector<int>& images) {
        std::vector<Element> e(images.begin(), images.end());
        return relabel(t, Permutation(e));
      },
      py::arg("table"), py::arg("images"),
      "images[i-1] is the image of element i.");
  m.def("canonical_form", &canonical_form);
  m.def("orbit", &orbit);
  m.def(
      "table_to_cube",
      [](const CayleyTable& t) { return cube_array(t.size(), table_to_cube(t).values()); });
  m.def("partial_to_cube", [](const PartialTable& p) {
    return cube_array(p.size(), partial_to_cube(p).values());
  });
  m.def("cube_to_table", [](const Array& c) {
    return cube_to_table(cube_order(c), cube_values(c));
  });

  m.def("count_tables", [](std::size_t n, std::size_t threads) {
    py::gil_scoped_release release;
    return count_tables(n, {threads});
  }, py::arg("n"), py::arg("threads") = 1);
  m.def("enumerate_tables", [](std::size_t n, std::size_t threads) {
    py::gil_scoped_release release;
    return enumerate_tables(n, {threads});
  }, py::arg("n"), py::arg("threads") = 1);
  m.def("enumerate_classes", [](std::size_t n, std::size_t threads) {
    py::gil_scoped_release release;
    return enumerate_classes(n, {threads});
  }, py::arg("n"), py::arg("threads") = 1);
  m.def(
      "complete",
      [](const PartialTable& p, std::optional<std::size_t> limit) {
        return complete_partial({p, limit});
      },
      py::arg("partial"), py::arg("limit") = py::none());

  m.def("kl_divergence", [](const Array& x, const Array& y) {
    return kl_divergence(cube_values(x), cube_values(y));
  });
  m.def(
      "associator_loss",
      [](const Array& y, bool symmetric) {
        return associator_loss(cube_order(y), cube_values(y), symmetric);
      },
      py::arg("cube"), py::arg("symmetric") = false);
  m.def("triple_products", [](const Array& y) {
    const std::size_t n = cube_order(y);
    const auto d = triple_products(n, cube_values(y));
    Array left({n, n, n, n}), right({n, n, n, n});
    std::copy(d.left.begin(), d.left.end(), left.mutable_data());
    std::copy(d.right.begin(), d.right.end(), right.mutable_data());
    return py::make_tuple(left, right);
  });
  m.def("guess_rate", [](const std::vector<CayleyTable>& out, const std::vector<CayleyTable>& orig) {
    return guess_rate(out, orig);
  });
  m.def("associative_rate",
        [](const std::vector<CayleyTable>& out) { return associative_rate(out); });

  py::class_<DatasetBundle>(m, "Dataset")
      .def_readonly("n", &DatasetBundle::n)
      .def_readonly("train", &DatasetBundle::train)
      .def_readonly("validation", &DatasetBundle::validation)
      .def_readonly("test", &DatasetBundle::test)
      .def_property_readonly("seed", [](const DatasetBundle& b) { return b.meta.seed; })
      .def_property_readonly("ratios", [](const DatasetBundle& b) { return b.meta.ratios; })
      .def_property_readonly("mask_fraction",
                             [](const DatasetBundle& b) { return b.meta.mask_fraction; })
      .def("__eq__", [](const DatasetBundle& a, const DatasetBundle& b) { return a == b; });

  m.def(
      "build_dataset",
      [](std::size_t n, std::array<double, 3> ratios, double mask_fraction, std::uint64_t seed,
         std::size_t threads) {
        py::gil_scoped_release release;
        return build_dataset(BuildConfig{n, ratios, mask_fraction, seed, threads});
      },
      py::arg("n"), py::arg("ratios") = std::array<double, 3>{0.1, 0.1, 0.8},
      py::arg("mask_fraction") = 0.5, py::arg("seed") = 0, py::arg("threads") = 1);
  m.def("write_dataset", &write_dataset, py::arg("dataset"), py::arg("path"));
  m.def("read_dataset", &read_dataset, py::arg("path"));
  m.def("dataset_content_hash", &dataset_content_hash, py::arg("path"));
  m.def("hash_file", &hash_file, py::arg("path"));

  py::class_<ModelParams>(m, "Model")
      .def_readonly("n", &ModelParams::n)
      .def_readonly("depth", &ModelParams::depth)
      .def_readonly("seed", &ModelParams::seed)
      .def_readonly("dims", &ModelParams::dims)
      .def_readonly("loss_name", &ModelParams::loss_name)
      .def_property_readonly("activation",
                             [](const ModelParams& p) { return to_string(p.activation); })
      .def("parameter_count", &ModelParams::parameter_count)
      .def("__eq__", [](const ModelParams& a, const ModelParams& b) { return a == b; });

  m.def(
      "init_network",
      [](std::size_t n, std::size_t depth, std::uint64_t seed, const std::string& activation) {
        return init_network(n, depth, seed, parse_activation(activation));
      },
      py::arg("n"), py::arg("depth") = 2, py::arg("seed") = 0, py::arg("activation") = "relu");
  m.def("save_checkpoint", &save_checkpoint, py::arg("model"), py::arg("path"));
  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));
  m.def(
      "predict",
      [](const ModelParams& model, const std::vector<PartialTable>& partials) {
        ad::Tensor out;
        {
          py::gil_scoped_release release;
          out = predict(model, stack_cubes(partials), masks_of(partials));
        }
        const std::size_t n = model.n;
        Array a({partials.size(), n, n, n});
        std::copy(out.data().begin(), out.data().end(), a.mutable_data());
        return a;
      },
      py::arg("model"), py::arg("partials"),
      "Eval-mode output cubes, shape (batch, n, n, n).");

  m.def(
      "train",
      [](const DatasetBundle& data, const std::string& loss, double lr, std::size_t epochs,
         std::size_t patience, std::size_t batch, std::size_t depth,
         const std::string& activation, std::optional<double> mask_fraction, std::uint64_t seed,
         bool symmetric_al, std::size_t threads) {
        TrainConfig cfg;
        cfg.loss = parse_loss_name(loss);
        cfg.learning_rate = lr;
        cfg.max_epochs = epochs;
        cfg.patience = patience;
        cfg.batch_size = batch;
        cfg.depth = depth;
        cfg.activation = parse_activation(activation);
        cfg.mask_fraction = mask_fraction.value_or(data.meta.mask_fraction);
        cfg.seeds = TrainSeeds::from_master(seed);
        cfg.symmetric_al = symmetric_al;
        cfg.threads = threads;
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train(cfg, data);
        }
        py::list epochs_out;
        for (const auto& e : r.history.epochs) {
          py::dict d;
          d["epoch"] = e.epoch;
          d["train_loss"] = e.train_loss;
          d["validation_loss"] = e.validation_loss;
          epochs_out.append(d);
        }
        py::dict h;
        h["epochs"] = epochs_out;
        h["best_epoch"] = r.history.best_epoch;
        h["stop_reason"] = to_string(r.history.stop_reason);
        h["initial_validation_loss"] = r.history.initial_validation_loss;
        return py::make_tuple(r.model, h);
      },
      py::arg("data"), py::arg("loss") = "al", py::arg("lr") = 1e-4, py::arg("epochs") = 1000,
      py::arg("patience") = 10, py::arg("batch") = 256, py::arg("depth") = 2,
      py::arg("activation") = "relu", py::arg("mask_fraction") = py::none(),
      py::arg("seed") = 0, py::arg("symmetric_al") = false, py::arg("threads") = 1,
      "Returns (model, history).");

  m.def(
      "evaluate",
      [](const ModelParams& model, const std::vector<MaskedPair>& pairs, std::size_t batch,
         std::size_t threads) {
        Evaluation e;
        {
          py::gil_scoped_release release;
          e = evaluate_detailed(model, pairs, {batch, threads});
        }
        py::dict d = report_dict(e.report);
        d["invalid_cubes"] = e.invalid_cubes;
        d["known_cell_violations"] = e.known_cell_violations;
        d["outputs"] = e.outputs;
        return d;
      },
      py::arg("model"), py::arg("pairs"), py::arg("batch") = 256, py::arg("threads") = 1);

  m.def(
      "gradcheck",
      [](std::uint64_t seed, std::size_t points, bool include_network) {
        GradCheckSuiteOptions opts;
        opts.seed = seed;
        opts.points = points;
        opts.include_network = include_network;
        GradCheckSuiteReport r;
        {
          py::gil_scoped_release release;
          r = run_gradcheck_suite(opts);
        }
        py::dict entries;
        for (const auto& e : r.entries) entries[py::str(e.name)] = e.max_relative_error;
        py::dict d;
        d["entries"] = entries;
        d["max_relative_error"] = r.max_relative_error();
        d["passed"] = r.passed();
        return d;
      },
      py::arg("seed") = 7, py::arg("points") = 10, py::arg("include_network") = true);
}
