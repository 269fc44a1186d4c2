#include <sstream>
#include <string>
#include <vector>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "typedpp/cli.hpp"
#include "typedpp/io.hpp"
#include "typedpp/model.hpp"
#include "typedpp/posterior.hpp"
#include "typedpp/sampler.hpp"
#include "typedpp/simulate.hpp"

namespace py = pybind11;
using namespace typedpp;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array points_to_array(const std::vector<DataPoint>& points)
{
    Array out({static_cast<py::ssize_t>(points.size()), py::ssize_t{4}});
    auto a = out.mutable_unchecked<2>();
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto r = static_cast<py::ssize_t>(i);
        a(r, 0) = points[i].male_age();
        a(r, 1) = points[i].female_age();
        a(r, 2) = points[i].linkage();
        a(r, 3) = points[i].direction();
    }
    return out;
}

std::vector<DataPoint> array_to_points(const Array& arr)
{
    if (arr.ndim() != 2 || arr.shape(1) != 4) {
        throw DomainError("points must be an (n, 4) array of male_age, female_age, linkage, direction");
    }
    auto a = arr.unchecked<2>();
    std::vector<DataPoint> out(static_cast<std::size_t>(arr.shape(0)));
    for (py::ssize_t i = 0; i < arr.shape(0); ++i) {
        DataPoint& p = out[static_cast<std::size_t>(i)];
        p.location = Vec2(a(i, 0), a(i, 1));
        p.mark = Vec2(a(i, 2), a(i, 3));
        p.extreme_direction = a(i, 3) == 0.0 || a(i, 3) == 1.0;
    }
    return out;
}

py::dict simulate(const std::string& scenario, std::size_t n, std::uint64_t seed)
{
    RngStream rng(seed, 0);
    const SimulatedScenario sim = generate_scenario(parse_scenario_name(scenario), n, rng);
    std::vector<int> labels;
    for (TypeLabel k : sim.data.labels) labels.push_back(to_int(k));
    py::dict out;
    out["points"] = points_to_array(sim.data.points);
    out["labels"] = py::array_t<int>(static_cast<py::ssize_t>(labels.size()), labels.data());
    out["components"] = sim.data.components;
    return out;
}

py::dict fit(const Array& points, int iterations, int burn_in, int thin, std::uint64_t seed, std::size_t H,
             const std::string& precision)
{
    const std::vector<DataPoint> data = array_to_points(points);
    Hyperparams hp;
    hp.H = H;
    McmcConfig cfg;
    cfg.iterations = iterations;
    cfg.burn_in = burn_in;
    cfg.thin = thin;
    cfg.seed = seed;
    if (precision == "escobar-west") {
        cfg.precision_update = PrecisionUpdate::EscobarWest;
    } else if (precision != "stick-breaking") {
        throw DomainError("precision must be 'escobar-west' or 'stick-breaking'");
    }
    PosteriorSamples ps;
    {
        py::gil_scoped_release release;
        ps = run_mcmc(data, hp, cfg);
    }

    const auto draws = static_cast<py::ssize_t>(ps.draws.size());
    Array probs({draws, py::ssize_t{3}});
    Array gamma(draws);
    auto pa = probs.mutable_unchecked<2>();
    auto ga = gamma.mutable_unchecked<1>();
    for (py::ssize_t d = 0; d < draws; ++d) {
        const ModelState& s = ps.draws[static_cast<std::size_t>(d)];
        for (py::ssize_t t = 0; t < 3; ++t) pa(d, t) = s.type_probs[static_cast<std::size_t>(t)];
        ga(d) = s.gamma;
    }
    Array assign({static_cast<py::ssize_t>(ps.assignment_freq.size()), py::ssize_t{3}});
    auto aa = assign.mutable_unchecked<2>();
    for (std::size_t i = 0; i < ps.assignment_freq.size(); ++i) {
        for (std::size_t t = 0; t < 3; ++t) aa(static_cast<py::ssize_t>(i), static_cast<py::ssize_t>(t)) = ps.assignment_freq[i][t];
    }
    const auto frac = male_source_fraction_trace(ps);

    py::list table;
    for (const auto& row : type_proportion_summary(ps, data.size())) {
        py::dict r;
        r["type"] = type_name(row.type);
        r["mean"] = row.p.mean;
        r["ci95"] = py::make_tuple(row.p.ci95.lo, row.p.ci95.hi);
        r["proportion"] = row.format_proportion();
        r["count"] = row.format_count();
        table.append(r);
    }
    py::dict out;
    out["type_probs"] = probs;
    out["gamma"] = gamma;
    out["male_fraction"] = Array(static_cast<py::ssize_t>(frac.size()), frac.data());
    out["assignments"] = assign;
    out["summary"] = table;
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Typed marked spatial Poisson process with a Gibbs sampler";
    m.attr("__version__") = kSoftwareVersion;

    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    m.def("logit", &logit, py::arg("x"));
    m.def("expit", &expit, py::arg("x"));
    m.def("quantile",
          [](const std::vector<double>& x, double prob) { return quantile(x, prob); },
          py::arg("sample"), py::arg("prob"));
    m.def(
        "classification_entropy",
        [](double p_fm, double p_none, double p_mf) {
            const EntropySummary e = classification_entropy({p_fm, p_none, p_mf});
            return py::make_tuple(e.entropy, to_int(e.modal), e.high);
        },
        py::arg("p_fm"), py::arg("p_none"), py::arg("p_mf"),
        "Entropy, modal type (-1, 0, 1) and high-entropy flag of a type posterior.");
    m.def("simulate", &simulate, py::arg("scenario"), py::arg("n"), py::arg("seed") = 1,
          "Draw a synthetic dataset; returns points (n, 4), labels and generating components.");
    m.def("fit", &fit, py::arg("points"), py::arg("iterations") = 3000, py::arg("burn_in") = 1000,
          py::arg("thin") = 1, py::arg("seed") = 1, py::arg("H") = 30, py::arg("precision") = "stick-breaking",
          "Run the Gibbs sampler on an (n, 4) array and return traces and summaries.");
    m.def(
        "load_dataset",
        [](const std::string& path, double filter_threshold) {
            return points_to_array(load_dataset_csv(path, AgeDomain{}, filter_threshold).points);
        },
        py::arg("path"), py::arg("filter_threshold") = 0.2);
    m.def(
        "cli",
        [](std::vector<std::string> args) {
            args.insert(args.begin(), "typedpp");
            std::ostringstream out, err;
            const int code = cli_main(args, out, err);
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Run a command-line invocation; returns (exit code, stdout, stderr).");
}
