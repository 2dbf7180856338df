#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "fewshot/bench.hpp"
#include "fewshot/error.hpp"
#include "fewshot/fixtures.hpp"
#include "fewshot/loss_kernels.hpp"
#include "fewshot/pseudo_pair.hpp"

namespace py = pybind11;
using namespace fewshot;

namespace {

SinkhornConfig sinkhorn_config(double epsilon, std::size_t max_iters, double tol, std::size_t passes) {
  SinkhornConfig cfg{epsilon, max_iters, tol, passes};
  cfg.validate();
  return cfg;
}

Prototypes as_prototypes(Matrix m) {
  Prototypes p;
  p.matrix = std::move(m);
  return p;
}

EvalConfig eval_config(double epsilon, std::size_t max_iters, double tol, std::size_t passes,
                       const std::string& metric, std::size_t threads) {
  EvalConfig cfg;
  cfg.sinkhorn = sinkhorn_config(epsilon, max_iters, tol, passes);
  cfg.metric = parse_cost_metric(metric);
  cfg.threads = threads;
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_fewshot, m) {
  m.doc() = "Few-shot evaluation over precomputed embeddings";

  // Messages read "<ErrorCode>: detail".
  py::register_exception<Error>(m, "FewshotError", PyExc_ValueError);

  py::class_<EmbeddingSet>(m, "EmbeddingSet")
      .def(py::init([](MatrixF features, std::vector<std::uint32_t> labels, std::uint32_t num_classes) {
             return EmbeddingSet::create(std::move(features), std::move(labels), num_classes);
           }),
           py::arg("features"), py::arg("labels"), py::arg("num_classes"))
      .def_property_readonly("size", &EmbeddingSet::size)
      .def_property_readonly("dim", &EmbeddingSet::dim)
      .def_property_readonly("num_classes", &EmbeddingSet::num_classes)
      .def_property_readonly("features", [](const EmbeddingSet& s) { return s.features(); })
      .def_property_readonly("labels", [](const EmbeddingSet& s) {
        return std::vector<std::uint32_t>(s.labels().begin(), s.labels().end());
      })
      .def("save", [](const EmbeddingSet& s, const std::filesystem::path& path) { save(s, path); })
      .def("__len__", &EmbeddingSet::size)
      .def("__eq__", [](const EmbeddingSet& a, const EmbeddingSet& b) { return a == b; });

  m.def("load", [](const std::filesystem::path& path, const std::string& fusion) {
    if (path.extension() == ".csv") return load_csv(path);
    return as_fused(load(path), parse_fusion_mode(fusion));
  }, py::arg("path"), py::arg("fusion") = "concat", "Loads an FSE1 or CSV file; token files are fused.");

  m.def("synthetic", [](std::uint32_t classes, std::uint32_t per_class, std::uint32_t dim, double radius,
                        double sigma, std::uint64_t seed) {
    return generate_synthetic({classes, per_class, dim, radius, sigma, seed});
  }, py::arg("classes"), py::arg("per_class"), py::arg("dim"), py::arg("radius"), py::arg("sigma"), py::arg("seed") = 0);

  m.def("sample_episode", [](const EmbeddingSet& set, std::uint32_t n, std::uint32_t k, std::uint32_t q,
                             std::uint64_t seed, std::uint64_t episode_id) {
    const Episode ep = sample_episode(set, {n, k, q}, seed, episode_id);
    py::dict out;
    out["classes"] = ep.classes;
    out["support"] = ep.support;
    out["query"] = ep.query;
    return out;
  }, py::arg("set"), py::arg("n"), py::arg("k"), py::arg("q"), py::arg("seed"), py::arg("episode_id"));

  m.def("cosine_classify", [](const Matrix& queries, const Matrix& prototypes) {
    std::vector<std::uint32_t> out;
    for (const auto& p : classify_rows(queries, as_prototypes(prototypes))) out.push_back(p.predicted_class);
    return out;
  }, py::arg("queries"), py::arg("prototypes"));

  m.def("fuse_tokens", [](const Vector& cls, const Matrix& patches, const Vector& attn, const std::string& mode) {
    return fuse_tokens(cls, patches, attn, parse_fusion_mode(mode));
  }, py::arg("cls"), py::arg("patches"), py::arg("attention"), py::arg("mode") = "concat");

  m.def("cost_matrix", [](const Matrix& queries, const Matrix& prototypes, const std::string& metric) {
    return cost_matrix(queries, as_prototypes(prototypes), parse_cost_metric(metric)).matrix;
  }, py::arg("queries"), py::arg("prototypes"), py::arg("metric") = "sq-euclidean-normalized");

  m.def("sinkhorn", [](const Matrix& cost, double epsilon, std::size_t max_iters, double tol) {
    const auto plan = sinkhorn(CostMatrix{cost, CostMetric::SqEuclideanNormalized},
                               sinkhorn_config(epsilon, max_iters, tol, 1));
    py::dict out;
    out["plan"] = plan.matrix;
    out["converged"] = plan.converged;
    out["iters_used"] = plan.iters_used;
    out["marginal_violation"] = plan.marginal_violation;
    return out;
  }, py::arg("cost"), py::arg("epsilon") = 0.1, py::arg("max_iters") = 1000, py::arg("tol") = 1e-8);

  m.def("transport_prototypes", [](const Matrix& plan, const Matrix& queries) {
    TransportPlan p;
    p.matrix = plan;
    return transport_prototypes(p, queries).matrix;
  }, py::arg("plan"), py::arg("queries"));

  m.def("assign_pairs", [](const Matrix& batch, double rho) {
    const auto a = assign_pairs(batch, rho);
    return py::make_tuple(a.pair_of, a.similarity, a.selected);
  }, py::arg("batch"), py::arg("rho") = 1.0, "Returns (pair_of, similarity, selected).");

  m.def("bce_pair_loss", [](const Matrix& batch, double rho) { return bce_pair_loss(batch, assign_pairs(batch, rho)); },
        py::arg("batch"), py::arg("rho") = 1.0);

  m.def("cross_entropy", [](const std::vector<double>& x, const std::vector<double>& y) { return cross_entropy(x, y); },
        py::arg("teacher"), py::arg("student"));
  m.def("ema_update", [](const std::vector<double>& t, const std::vector<double>& s, double momentum) {
    return ema_update(t, s, momentum);
  }, py::arg("teacher"), py::arg("student"), py::arg("momentum"));
  m.def("evaluate_fixtures_json", [](const std::string& text, std::optional<double> rho, bool normalize) {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, e.what());
    }
    return format_fixture_results(evaluate_fixtures(doc, {rho, normalize}));
  }, py::arg("text"), py::arg("rho") = py::none(), py::arg("normalize") = false);

  m.def("run_eval_json", [](const EmbeddingSet& set, const std::string& method, std::uint32_t n, std::uint32_t k,
                            std::uint32_t q, std::size_t episodes, std::uint64_t seed, double epsilon,
                            std::size_t max_iters, double tol, std::size_t passes, const std::string& metric,
                            std::size_t threads) {
    const EvalConfig cfg = eval_config(epsilon, max_iters, tol, passes, metric, threads);
    py::gil_scoped_release release;
    return report_to_json(run_eval(set, {n, k, q}, parse_method(method), cfg, episodes, seed));
  }, py::arg("set"), py::arg("method") = "proto", py::arg("n") = 5, py::arg("k") = 1, py::arg("q") = 15,
     py::arg("episodes") = 2000, py::arg("seed") = 0, py::arg("epsilon") = 0.1, py::arg("max_iters") = 1000,
     py::arg("tol") = 1e-8, py::arg("passes") = 1, py::arg("metric") = "sq-euclidean-normalized", py::arg("threads") = 1);

  m.def("sweep_csv", [](const EmbeddingSet& set, const std::string& method, std::uint32_t n,
                        std::vector<std::uint32_t> k_list, std::vector<std::uint32_t> q_list, std::size_t episodes,
                        std::uint64_t seed, double epsilon, std::size_t threads) {
    EvalConfig cfg = eval_config(epsilon, 1000, 1e-8, 1, "sq-euclidean-normalized", threads);
    cfg.keep_per_episode = false;
    py::gil_scoped_release release;
    return sweep_to_csv(sweep(set, n, k_list, q_list, parse_method(method), cfg, episodes, seed));
  }, py::arg("set"), py::arg("method") = "proto", py::arg("n") = 5, py::arg("k_list") = std::vector<std::uint32_t>{1, 2, 3, 4, 5},
     py::arg("q_list") = std::vector<std::uint32_t>{15}, py::arg("episodes") = 2000, py::arg("seed") = 0,
     py::arg("epsilon") = 0.1, py::arg("threads") = 1);
}
