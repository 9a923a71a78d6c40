#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "doseresp/cli.hpp"
#include "doseresp/conjugate.hpp"
#include "doseresp/data.hpp"
#include "doseresp/diagnostics.hpp"
#include "doseresp/hill.hpp"
#include "doseresp/model.hpp"
#include "doseresp/oracle.hpp"
#include "doseresp/sampler.hpp"

namespace py = pybind11;
using namespace doseresp;

namespace {

py::dict column_dict(const ColumnSummary& c) {
  py::dict d;
  d["min"] = c.min;
  d["q1"] = c.q1;
  d["median"] = c.median;
  d["mean"] = c.mean;
  d["q3"] = c.q3;
  d["max"] = c.max;
  return d;
}

py::dict summary_dict(const PosteriorSummary& s) {
  py::dict params;
  for (const auto& p : s.parameters) {
    py::dict d;
    d["mean"] = p.mean;
    d["sd"] = p.sd;
    d["q25"] = p.q25;
    d["median"] = p.median;
    d["q75"] = p.q75;
    d["split_rhat"] = p.split_rhat;
    d["ess"] = p.ess;
    d["mcse"] = p.mcse();
    params[py::str(p.name)] = d;
  }
  py::dict out;
  out["parameters"] = params;
  out["divergences"] = s.divergence_count;
  out["draws"] = s.total_draws;
  return out;
}

// chains x iterations x parameters
py::array_t<double> draws_array(const SampleRun& run) {
  const std::size_t chains = run.chains.size();
  const std::size_t iters = chains ? run.chains[0].iterations() : 0;
  const std::size_t params = run.parameter_names.size();
  py::array_t<double> a({chains, iters, params});
  auto m = a.mutable_unchecked<3>();
  for (std::size_t c = 0; c < chains; ++c)
    for (std::size_t i = 0; i < iters; ++i)
      for (std::size_t p = 0; p < params; ++p) m(c, i, p) = run.chains[c].at(i, p);
  return a;
}

ChainSet chain_set(py::array_t<double, py::array::c_style | py::array::forcecast> a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-d array of shape (chains, draws)");
  auto r = a.unchecked<2>();
  ChainSet out(r.shape(0));
  for (py::ssize_t c = 0; c < r.shape(0); ++c)
    for (py::ssize_t i = 0; i < r.shape(1); ++i) out[c].push_back(r(c, i));
  return out;
}

py::dict sample_model(const ModelDensity& model, const HmcConfig& config) {
  SampleRun run;
  {
    py::gil_scoped_release release;
    run = run_chains(model, config);
  }
  py::dict out;
  out["names"] = run.parameter_names;
  out["draws"] = draws_array(run);
  std::vector<std::vector<bool>> divergent;
  for (const auto& c : run.chains) divergent.push_back(c.divergent);
  out["divergent"] = divergent;
  out["summary"] = summary_dict(summarize_run(run));
  return out;
}

}  // namespace

PYBIND11_MODULE(doseresp, m) {
  m.doc() = "Bayesian dose-response modelling with Hamiltonian Monte Carlo";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<PriorError>(m, "PriorError", PyExc_ValueError);
  py::register_exception<HillError>(m, "HillError", PyExc_ValueError);
  py::register_exception<OracleError>(m, "OracleError", PyExc_ValueError);
  py::register_exception<InitializationError>(m, "InitializationError", PyExc_RuntimeError);

  py::class_<TrialRecord>(m, "TrialRecord")
      .def(py::init([](double dosage, int total, int improved) {
             return TrialRecord{dosage, total, improved};
           }),
           py::arg("dosage"), py::arg("total"), py::arg("improved"))
      .def_readonly("dosage", &TrialRecord::dosage)
      .def_readonly("total", &TrialRecord::total)
      .def_readonly("improved", &TrialRecord::improved)
      .def("__eq__", [](const TrialRecord& a, const TrialRecord& b) { return a == b; })
      .def("__repr__", [](const TrialRecord& r) {
        std::ostringstream s;
        s << "TrialRecord(" << r.dosage << ", " << r.total << ", " << r.improved << ")";
        return s.str();
      });

  py::class_<Dataset>(m, "Dataset")
      .def(py::init<std::vector<TrialRecord>>(), py::arg("records"))
      .def_property_readonly("records", &Dataset::records)
      .def("__len__", &Dataset::size)
      .def("__eq__", [](const Dataset& a, const Dataset& b) { return a == b; });

  m.def("parse_trials", [](const std::string& text) { return parse_trials(text); }, py::arg("text"));
  m.def("load_trials", &load_trials, py::arg("path"));
  m.def("serialize_trials", &serialize_trials, py::arg("dataset"));
  m.def(
      "summarize",
      [](const Dataset& ds) {
        const auto s = summarize(ds);
        py::dict d;
        d["dosage"] = column_dict(s.dosage);
        d["total"] = column_dict(s.total);
        d["improved"] = column_dict(s.improved);
        return d;
      },
      py::arg("dataset"));
  m.def("synthesize", &synthesize, py::arg("records"), py::arg("alpha"), py::arg("beta"),
        py::arg("seed"));
  m.def("synthesize_hierarchical", &synthesize_hierarchical, py::arg("records"),
        py::arg("mu_alpha"), py::arg("mu_beta"), py::arg("sigma_alpha"), py::arg("sigma_beta"),
        py::arg("seed"));

  py::class_<PriorSpec>(m, "Prior")
      .def(py::init([](const std::string& text) { return PriorSpec::parse(text); }),
           py::arg("text"))
      .def("__str__", &PriorSpec::to_string)
      .def("__eq__", [](const PriorSpec& a, const PriorSpec& b) { return a == b; });

  py::class_<ModelDensity>(m, "Model")
      .def_property_readonly("dim", &ModelDensity::dim)
      .def_property_readonly("parameter_names", &ModelDensity::parameter_names)
      .def("log_density", [](const ModelDensity& md, std::vector<double> q) { return md.log_density(q); })
      .def("gradient", [](const ModelDensity& md, std::vector<double> q) { return md.gradient(q); })
      .def("constrain", [](const ModelDensity& md, std::vector<double> q) { return md.constrain(q); });

  py::class_<SimpleLrModel, ModelDensity>(m, "SimpleModel")
      .def(py::init<Dataset, PriorSpec, PriorSpec>(), py::arg("dataset"),
           py::arg("prior_alpha") = PriorSpec::normal(0, 20),
           py::arg("prior_beta") = PriorSpec::normal(0, 20));

  py::class_<HierLrModel, ModelDensity>(m, "HierModel")
      .def(py::init([](Dataset ds, bool non_centered, PriorSpec mu_a, PriorSpec mu_b,
                       PriorSpec sigma) {
             HierPriors p{mu_a, mu_b, sigma, sigma};
             return HierLrModel(std::move(ds),
                                non_centered ? Parameterization::ncp : Parameterization::centered,
                                p);
           }),
           py::arg("dataset"), py::arg("non_centered") = true,
           py::arg("prior_mu_alpha") = PriorSpec::normal(0, 20),
           py::arg("prior_mu_beta") = PriorSpec::normal(0, 20),
           py::arg("prior_sigma") = PriorSpec::half_normal(2));

  py::class_<ProportionModel, ModelDensity>(m, "ProportionModel")
      .def(py::init<int, int, double, double>(), py::arg("improved"), py::arg("total"),
           py::arg("prior_a") = 1.0, py::arg("prior_b") = 1.0);

  m.def(
      "sample",
      [](const ModelDensity& model, int chains, int iters, double warmup_frac,
         double target_accept, std::uint64_t seed) {
        HmcConfig cfg;
        cfg.chains = chains;
        cfg.total_iterations = iters;
        cfg.warmup_fraction = warmup_frac;
        cfg.target_accept = target_accept;
        cfg.seed = seed;
        cfg.validate();
        return sample_model(model, cfg);
      },
      py::arg("model"), py::arg("chains") = 4, py::arg("iters") = 4000,
      py::arg("warmup_frac") = 0.5, py::arg("target_accept") = 0.8, py::arg("seed") = 1,
      "Run HMC. Returns names, draws (chains x draws x parameters), divergent flags "
      "and a posterior summary.");

  m.def("split_rhat", [](py::array_t<double> a) { return split_rhat(chain_set(a)); },
        py::arg("chains"));
  m.def("effective_sample_size",
        [](py::array_t<double> a) { return effective_sample_size(chain_set(a)); },
        py::arg("chains"));

  m.def(
      "beta_posterior",
      [](int improved, int total, double a, double b) {
        const auto post = beta_binomial_posterior(BetaParams(a, b), improved, total);
        const auto mom = beta_moments(post);
        py::dict d;
        d["a"] = post.a;
        d["b"] = post.b;
        d["mean"] = mom.mean;
        d["sd"] = mom.sd;
        return d;
      },
      py::arg("improved"), py::arg("total"), py::arg("prior_a") = 1.0, py::arg("prior_b") = 1.0);

  m.def(
      "grid_moments",
      [](const SimpleLrModel& model, int resolution, int refinements) {
        std::array<MarginalSummary, 2> mom;
        {
          py::gil_scoped_release release;
          mom = grid_moments(grid_posterior(model, GridBounds{}, resolution, refinements));
        }
        py::dict out;
        const char* names[] = {"alpha", "beta"};
        for (int i = 0; i < 2; ++i) {
          py::dict d;
          d["mean"] = mom[i].mean;
          d["sd"] = mom[i].sd;
          d["q25"] = mom[i].q25;
          d["median"] = mom[i].median;
          d["q75"] = mom[i].q75;
          out[names[i]] = d;
        }
        return out;
      },
      py::arg("model"), py::arg("resolution") = kDefaultGridResolution,
      py::arg("refinements") = kDefaultGridRefinements);

  py::class_<HillFit>(m, "HillFit")
      .def_readonly("r_max", &HillFit::r_max)
      .def_readonly("d50", &HillFit::d50)
      .def_readonly("c_h", &HillFit::c_h)
      .def_readonly("d10", &HillFit::d10)
      .def_readonly("d90", &HillFit::d90)
      .def("__call__", [](const HillFit& f, double d) { return hill_response(d, f); });
  m.def("fit_hill", [](const Dataset& ds) { return fit_hill(ds); }, py::arg("dataset"));
  m.def("hill_coefficient", &hill_coefficient, py::arg("d10"), py::arg("d90"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run a command-line invocation; returns (exit_code, stdout, stderr).");
}
