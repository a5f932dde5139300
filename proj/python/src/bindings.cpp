#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "georep/app/kv.hpp"
#include "georep/core/codec.hpp"
#include "georep/harness/audit.hpp"
#include "georep/harness/deployment.hpp"
#include "georep/harness/metrics.hpp"
#include "georep/irmc/conformance.hpp"

namespace py = pybind11;
using namespace georep;
using namespace georep::harness;

namespace {

struct RunResult {
  std::string scenario;
  std::string digest;
  std::string trace;
  std::string report_json;
  std::vector<Verdict> verdicts;
  std::vector<LatencyRow> latency;
  std::map<std::string, std::uint64_t> wan;
  std::size_t outstanding = 0;
  bool ok = false;
};

RunResult run_scenario(const std::string& json_text, std::optional<std::uint64_t> seed, std::optional<std::string> mode,
                       std::optional<std::string> irmc, bool full_trace) {
  ScenarioConfig cfg = parse_scenario(json_text);
  if (seed) cfg.seed = *seed;
  if (mode) {
    auto m = parse_mode(*mode);
    if (!m) throw ConfigError("unknown mode " + *mode);
    cfg.mode = *m;
  }
  if (irmc) {
    if (*irmc != "rc" && *irmc != "sc") throw ConfigError("unknown channel variant " + *irmc);
    cfg.request_variant = cfg.commit_variant = *irmc == "sc" ? irmc::Variant::Sc : irmc::Variant::Rc;
  }
  if (full_trace) cfg.trace = TraceLevel::Full;
  RunResult out;
  {
    py::gil_scoped_release release;
    Deployment d(cfg);
    d.run();
    const MetricsReport rep = make_report(d.trace(), !cfg.beyond_threshold);
    std::ostringstream text;
    d.trace().write(text);
    out.scenario = cfg.name;
    out.digest = rep.trace_digest;
    out.trace = text.str();
    out.report_json = report_json(rep);
    out.verdicts = rep.verdicts;
    out.latency = rep.latency;
    for (const auto& w : rep.wan) out.wan[w.kind] = w.messages;
    out.outstanding = d.outstanding();
    out.ok = rep.ok();
  }
  return out;
}

std::vector<Verdict> audit_text(const std::string& text, bool liveness) {
  std::istringstream in(text);
  const TraceLog trace = TraceLog::read(in);
  return audit(trace, liveness);
}

py::dict conformance(const std::string& variant, std::uint32_t f, std::size_t schedules, std::uint64_t seed) {
  if (variant != "rc" && variant != "sc") throw ConfigError("unknown channel variant " + variant);
  irmc::ConformanceOptions opts;
  opts.f = f;
  opts.schedules = schedules;
  opts.seed = seed;
  irmc::ConformanceReport rep;
  {
    py::gil_scoped_release release;
    rep = irmc::run_conformance(irmc::factory_for(variant == "sc" ? irmc::Variant::Sc : irmc::Variant::Rc), opts);
  }
  py::dict out;
  out["schedules"] = rep.schedules;
  out["deliveries"] = rep.deliveries;
  out["too_old"] = rep.too_old;
  out["violations"] = rep.violations;
  out["examples"] = rep.examples;
  out["passed"] = rep.passed();
  return out;
}

py::bytes as_py(const Bytes& b) { return py::bytes(reinterpret_cast<const char*>(b.data()), b.size()); }
Bytes from_py(const py::bytes& b) {
  const std::string s = b;
  return Bytes(s.begin(), s.end());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Simulated geo-replicated BFT deployments: run scenarios, audit traces, exercise channels.";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DecodeError>(m, "DecodeError", PyExc_ValueError);

  py::class_<Verdict>(m, "Verdict")
      .def_readonly("name", &Verdict::name)
      .def_readonly("passed", &Verdict::pass)
      .def_readonly("detail", &Verdict::detail)
      .def("__repr__", [](const Verdict& v) { return "<Verdict " + v.name + (v.pass ? " pass>" : " FAIL>"); });

  py::class_<LatencyRow>(m, "LatencyRow")
      .def_readonly("region", &LatencyRow::region)
      .def_readonly("op", &LatencyRow::op)
      .def_readonly("count", &LatencyRow::count)
      .def_readonly("p50_ms", &LatencyRow::p50_ms)
      .def_readonly("p90_ms", &LatencyRow::p90_ms);

  py::class_<RunResult>(m, "RunResult")
      .def_readonly("scenario", &RunResult::scenario)
      .def_readonly("digest", &RunResult::digest)
      .def_readonly("trace", &RunResult::trace)
      .def_readonly("report_json", &RunResult::report_json)
      .def_readonly("verdicts", &RunResult::verdicts)
      .def_readonly("latency", &RunResult::latency)
      .def_readonly("wan", &RunResult::wan)
      .def_readonly("outstanding", &RunResult::outstanding)
      .def_readonly("ok", &RunResult::ok);

  m.def("parse_scenario", [](const std::string& text) { return to_json(parse_scenario(text)); }, py::arg("json_text"),
        "Validate a scenario and return it in canonical form with every default filled in.");
  m.def("run_scenario", &run_scenario, py::arg("json_text"), py::arg("seed") = py::none(),
        py::arg("mode") = py::none(), py::arg("irmc") = py::none(), py::arg("full_trace") = false);
  m.def("audit", &audit_text, py::arg("trace_text"), py::arg("liveness") = true);
  m.def("irmc_conformance", &conformance, py::arg("variant"), py::arg("f") = 1, py::arg("schedules") = 100,
        py::arg("seed") = 1);

  py::class_<app::KvApplication>(m, "KvStore")
      .def(py::init<>())
      .def("execute", [](app::KvApplication& kv, const py::bytes& op) { return to_string(kv.execute(from_py(op))); })
      .def("read", [](const app::KvApplication& kv, const py::bytes& op) { return to_string(kv.read(from_py(op))); })
      .def("snapshot", [](const app::KvApplication& kv) { return as_py(kv.snapshot()); })
      .def("restore", [](app::KvApplication& kv, const py::bytes& s) { kv.restore(from_py(s)); })
      .def_property_readonly("data", &app::KvApplication::data);
  m.def("put_op", [](const std::string& k, const std::string& v) { return as_py(app::put_op(k, v)); });
  m.def("get_op", [](const std::string& k) { return as_py(app::get_op(k)); });
  m.def("append_op", [](const std::string& k, const std::string& s) { return as_py(app::append_op(k, s)); });
}
