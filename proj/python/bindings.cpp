#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <string>
#include <vector>

#include "fgkf/common.hpp"
#include "fgkf/config.hpp"
#include "fgkf/corpus.hpp"
#include "fgkf/crf.hpp"
#include "fgkf/metrics.hpp"
#include "fgkf/run.hpp"
#include "fgkf/value.hpp"

namespace py = pybind11;
using namespace fgkf;

namespace {

using Matrix = std::vector<std::vector<double>>;

Value matrix_value(const Matrix& m, const char* what) {
  if (m.empty()) throw ShapeError(std::string(what) + ": empty matrix");
  const size_t cols = m[0].size();
  std::vector<double> flat;
  flat.reserve(m.size() * cols);
  for (const auto& row : m) {
    if (row.size() != cols) throw ShapeError(std::string(what) + ": ragged rows");
    flat.insert(flat.end(), row.begin(), row.end());
  }
  return Value::constant(static_cast<int>(m.size()), static_cast<int>(cols),
                         std::move(flat));
}

CrfParams chain_params(const Matrix& trans, const std::vector<double>& start,
                       const std::vector<double>& stop) {
  const size_t k = trans.size();
  if (start.size() != k || stop.size() != k)
    throw ShapeError("chain: start/stop length must match the tag count");
  CrfParams p;
  p.trans = matrix_value(trans, "trans");
  p.start = Value::constant(1, static_cast<int>(k), start);
  p.stop = Value::constant(1, static_cast<int>(k), stop);
  p.tags = static_cast<int>(k);
  return p;
}

Matrix to_matrix(const Value& v) {
  Matrix out(v.rows(), std::vector<double>(v.cols()));
  std::span<const double> d = v.data();
  for (size_t r = 0; r < v.rows(); ++r)
    for (size_t c = 0; c < v.cols(); ++c) out[r][c] = d[r * v.cols() + c];
  return out;
}

TagScheme make_scheme(const std::string& kind, const std::vector<std::string>& labels) {
  if (kind == "bmes") return TagScheme::bmes();
  if (kind == "bio") return TagScheme::bio(labels);
  if (kind == "plain") return TagScheme::plain(labels);
  throw ConfigError("unknown scheme '" + kind + "'");
}

std::vector<std::vector<int>> encode_tags(const std::vector<std::vector<std::string>>& rows,
                                          const TagScheme& scheme) {
  std::vector<std::vector<int>> out(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    out[i].reserve(rows[i].size());
    for (const std::string& name : rows[i]) {
      const int id = scheme.id(name);
      if (id < 0) throw DataError("tag '" + name + "' is not part of the scheme");
      out[i].push_back(id);
    }
  }
  return out;
}

py::dict span_f1_dict(const SpanF1Result& r) {
  py::dict out;
  out["precision"] = r.precision;
  out["recall"] = r.recall;
  out["f1"] = r.f1;
  out["gold_count"] = r.gold_count;
  out["pred_count"] = r.pred_count;
  out["match_count"] = r.match_count;
  py::dict per_type;
  for (const auto& [type, prf] : r.per_type) {
    py::dict t;
    t["precision"] = prf[0];
    t["recall"] = prf[1];
    t["f1"] = prf[2];
    per_type[py::str(type)] = t;
  }
  out["per_type"] = per_type;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core: chain inference, span metrics, and the run driver.";

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.def(
      "run_command",
      [](const std::string& command, const KeyValues& settings) {
        run(resolve_config(command, {}, settings));
      },
      py::arg("command"), py::arg("settings"),
      "Execute one command (train/evaluate/synth/relevance-dump) with the given "
      "key-value settings, writing artifacts into out_dir.");

  m.def(
      "crf_log_partition",
      [](const Matrix& emissions, const Matrix& trans, const std::vector<double>& start,
         const std::vector<double>& stop) {
        CrfParams p = chain_params(trans, start, stop);
        return crf_log_partition(matrix_value(emissions, "emissions"), p).item();
      },
      py::arg("emissions"), py::arg("trans"), py::arg("start"), py::arg("stop"));

  m.def(
      "crf_marginals",
      [](const Matrix& emissions, const Matrix& trans, const std::vector<double>& start,
         const std::vector<double>& stop) {
        CrfParams p = chain_params(trans, start, stop);
        return to_matrix(crf_marginals(matrix_value(emissions, "emissions"), p));
      },
      py::arg("emissions"), py::arg("trans"), py::arg("start"), py::arg("stop"));

  m.def(
      "crf_nll",
      [](const Matrix& emissions, const Matrix& trans, const std::vector<double>& start,
         const std::vector<double>& stop, const std::vector<int>& gold) {
        CrfParams p = chain_params(trans, start, stop);
        return crf_nll(matrix_value(emissions, "emissions"), p, gold).item();
      },
      py::arg("emissions"), py::arg("trans"), py::arg("start"), py::arg("stop"),
      py::arg("gold"));

  m.def(
      "crf_viterbi",
      [](const Matrix& emissions, const Matrix& trans, const std::vector<double>& start,
         const std::vector<double>& stop) {
        CrfParams p = chain_params(trans, start, stop);
        return crf_viterbi(matrix_value(emissions, "emissions"), p);
      },
      py::arg("emissions"), py::arg("trans"), py::arg("start"), py::arg("stop"));

  m.def(
      "span_f1",
      [](const std::vector<std::vector<int>>& gold,
         const std::vector<std::vector<int>>& pred, const std::string& scheme,
         const std::vector<std::string>& labels) {
        return span_f1_dict(span_f1(gold, pred, make_scheme(scheme, labels)));
      },
      py::arg("gold"), py::arg("pred"), py::arg("scheme"),
      py::arg("labels") = std::vector<std::string>{});
  m.def(
      "span_f1",
      [](const std::vector<std::vector<std::string>>& gold,
         const std::vector<std::vector<std::string>>& pred, const std::string& scheme,
         const std::vector<std::string>& labels) {
        TagScheme s = make_scheme(scheme, labels);
        return span_f1_dict(span_f1(encode_tags(gold, s), encode_tags(pred, s), s));
      },
      py::arg("gold"), py::arg("pred"), py::arg("scheme"),
      py::arg("labels") = std::vector<std::string>{});

  m.def("token_accuracy", &token_accuracy, py::arg("gold"), py::arg("pred"));
  m.def(
      "token_accuracy",
      [](const std::vector<std::vector<std::string>>& gold,
         const std::vector<std::vector<std::string>>& pred) {
        // Intern the names so the id-based checker handles shapes and counting.
        std::map<std::string, int> ids;
        auto intern = [&](const std::vector<std::vector<std::string>>& rows) {
          std::vector<std::vector<int>> out(rows.size());
          for (size_t i = 0; i < rows.size(); ++i)
            for (const std::string& name : rows[i])
              out[i].push_back(ids.emplace(name, static_cast<int>(ids.size())).first->second);
          return out;
        };
        return token_accuracy(intern(gold), intern(pred));
      },
      py::arg("gold"), py::arg("pred"));
}
