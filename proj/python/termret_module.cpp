#include <pybind11/gil_safe_call_once.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "termret/corpus.hpp"
#include "termret/error.hpp"
#include "termret/evaluation.hpp"
#include "termret/experiment.hpp"
#include "termret/lexical_sim.hpp"
#include "termret/prompting.hpp"
#include "termret/syntax_sim.hpp"
#include "termret/treebank.hpp"

namespace py = pybind11;
using namespace termret;

namespace {

MatchMode mode_from(const std::string& name) {
  if (name == "label") return MatchMode::kLabel;
  if (name == "production") return MatchMode::kProduction;
  throw Error(ErrorKind::kConfig, "kernel mode must be label or production, got '" + name + "'");
}

KernelConfig kernel_config(double lambda, const std::string& mode) {
  KernelConfig cfg;
  cfg.decay_lambda = lambda;
  cfg.match_mode = mode_from(mode);
  cfg.validate();
  return cfg;
}

std::vector<MatchCounts> counts_from(const std::vector<std::tuple<std::size_t, std::size_t, std::size_t>>& rows) {
  std::vector<MatchCounts> out;
  out.reserve(rows.size());
  for (const auto& [tp, fp, fn] : rows) out.push_back({tp, fp, fn});
  return out;
}

py::dict record_dict(const SentenceRecord& r) {
  py::dict d;
  d["id"] = r.id;
  d["text"] = r.text;
  d["domain"] = r.domain;
  d["terms"] = r.terms;
  d["split"] = r.split ? py::object(py::str(std::string(to_string(*r.split)))) : py::object(py::none());
  return d;
}

py::dict interval_dict(const Interval& i) {
  py::dict d;
  d["lo"] = i.lo;
  d["hi"] = i.hi;
  return d;
}

}  // namespace

PYBIND11_MODULE(_termret, m) {
  m.doc() = "Demonstration retrieval, prompting and scoring for term extraction";
  m.attr("__version__") = "0.1.0";

  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error_type;
  error_type.call_once_and_store_result([&] { return py::object(py::exception<Error>(m, "Error")); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const py::object& type = error_type.get_stored();
      py::object err = type(e.what());
      err.attr("kind") = std::string(to_string(e.kind()));
      err.attr("exit_code") = exit_code_for(e.kind());
      PyErr_SetObject(type.ptr(), err.ptr());
    }
  });

  py::class_<ParseTree>(m, "Tree")
      .def_static("parse", &parse_bracketed, py::arg("text"))
      .def("__len__", &ParseTree::size)
      .def("__str__", &ParseTree::to_string)
      .def("__eq__", [](const ParseTree& a, const ParseTree& b) { return a == b; })
      .def("tokens", &ParseTree::tokens)
      .def("unlexicalized", [](const ParseTree& t) { return unlexicalize(t); })
      .def("normalized", [](const ParseTree& t, bool strip_functional, bool drop_punctuation) {
        TreeOptions o;
        o.strip_functional = strip_functional;
        o.drop_punctuation = drop_punctuation;
        return normalize(t, o);
      }, py::arg("strip_functional") = false, py::arg("drop_punctuation") = false);

  m.def("tree_kernel", [](const ParseTree& a, const ParseTree& b, double lambda, const std::string& mode) {
    return tree_kernel(a, b, kernel_config(lambda, mode));
  }, py::arg("a"), py::arg("b"), py::arg("decay_lambda") = 0.4, py::arg("mode") = "label");
  m.def("tree_similarity", [](const ParseTree& a, const ParseTree& b, double lambda, const std::string& mode) {
    return normalized_similarity(a, b, kernel_config(lambda, mode));
  }, py::arg("a"), py::arg("b"), py::arg("decay_lambda") = 0.4, py::arg("mode") = "label");
  m.def("tree_edit_distance", &tree_edit_distance, py::arg("a"), py::arg("b"));
  m.def("hungarian", [](const std::vector<std::vector<double>>& cost) {
    const std::size_t rows = cost.size(), cols = rows ? cost[0].size() : 0;
    std::vector<double> flat;
    for (const auto& r : cost) {
      if (r.size() != cols) throw Error(ErrorKind::kInvalidArgument, "cost rows differ in length");
      flat.insert(flat.end(), r.begin(), r.end());
    }
    const Assignment a = hungarian_assignment(Matrix(rows, cols, std::move(flat)));
    return py::make_tuple(a.pairs, a.total_cost);
  }, py::arg("cost"), "Minimum-cost assignment; returns (pairs, total_cost).");

  m.def("tokenize", &tokenize, py::arg("text"));
  py::class_<Bm25Index>(m, "Bm25Index")
      .def(py::init([](const std::vector<std::string>& docs, double k1, double b, bool dedupe) {
        std::vector<std::vector<std::string>> tokens;
        for (const auto& d : docs) tokens.push_back(tokenize(d));
        return Bm25Index::build(tokens, {k1, b, dedupe});
      }), py::arg("documents"), py::arg("k1") = 1.5, py::arg("b") = 0.75, py::arg("dedupe_query_terms") = true)
      .def("__len__", &Bm25Index::num_docs)
      .def("idf", &Bm25Index::idf)
      .def("scores", [](const Bm25Index& idx, const std::string& query) { return idx.score_all(tokenize(query)); });

  m.def("load_corpus", [](const std::filesystem::path& path) {
    py::list out;
    for (const auto& r : load_corpus(path).records) out.append(record_dict(r));
    return out;
  }, py::arg("path"));
  m.def("corpus_stats", [](const std::filesystem::path& path) {
    const CorpusStats s = corpus_stats(load_corpus(path).records);
    py::dict d;
    d["n_sentences"] = s.n_sentences;
    d["total_words"] = s.total_words;
    d["total_terms"] = s.total_terms;
    d["avg_words"] = s.avg_words;
    d["avg_terms"] = s.avg_terms;
    return d;
  }, py::arg("path"));

  m.def("instruction", [](const std::string& domain, std::optional<std::string> tmpl) {
    return render_instruction(tmpl ? *tmpl : std::string(default_instruction_template()), domain);
  }, py::arg("domain"), py::arg("template") = py::none());
  m.def("parse_response", [](const std::string& raw) { return parse_response(raw).terms; }, py::arg("raw"));

  m.def("match_counts", [](const std::vector<std::string>& predicted, const std::vector<std::string>& gold) {
    const MatchCounts c = match_counts(predicted, gold);
    return py::make_tuple(c.tp, c.fp, c.fn);
  }, py::arg("predicted"), py::arg("gold"));
  m.def("micro_prf", [](const std::vector<std::tuple<std::size_t, std::size_t, std::size_t>>& rows) {
    const Prf p = micro_prf(counts_from(rows));
    return py::make_tuple(p.precision, p.recall, p.f1);
  }, py::arg("counts"));
  m.def("bootstrap_ci", [](const std::vector<std::tuple<std::size_t, std::size_t, std::size_t>>& rows,
                           std::size_t resamples, double level, std::uint64_t seed) {
    const BootstrapCi ci = bootstrap_ci(counts_from(rows), resamples, level, seed);
    py::dict d;
    d["precision"] = interval_dict(ci.precision);
    d["recall"] = interval_dict(ci.recall);
    d["f1"] = interval_dict(ci.f1);
    return d;
  }, py::arg("counts"), py::arg("resamples") = 10000, py::arg("level") = 0.95, py::arg("seed") = 0);
  m.def("paired_pvalue", [](const std::vector<std::tuple<std::size_t, std::size_t, std::size_t>>& a,
                            const std::vector<std::tuple<std::size_t, std::size_t, std::size_t>>& b,
                            std::size_t resamples, std::uint64_t seed) {
    return paired_bootstrap_pvalue(counts_from(a), counts_from(b), resamples, seed);
  }, py::arg("a"), py::arg("b"), py::arg("resamples") = 10000, py::arg("seed") = 0);
  m.def("spearman", [](const std::vector<double>& x, const std::vector<double>& y) { return spearman(x, y); });

  m.def("run_experiment", [](std::optional<std::filesystem::path> config,
                             const std::map<std::string, std::string>& overrides) {
    const ExperimentConfig cfg = load_config(config, overrides);
    RunPaths paths;
    ExperimentReport report;
    {
      py::gil_scoped_release release;
      report = run_experiment(cfg, {}, &paths);
    }
    return py::make_tuple(report.to_json(), paths.dir);
  }, py::arg("config") = py::none(), py::arg("overrides") = std::map<std::string, std::string>{},
     "Runs the full pipeline; returns (report_json, run_dir).");
}
