#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "sigdistill/distill.hpp"
#include "sigdistill/error.hpp"
#include "sigdistill/eval.hpp"
#include "sigdistill/experiment.hpp"
#include "sigdistill/siggen.hpp"
#include "sigdistill/spectral.hpp"

namespace py = pybind11;
using namespace sigdistill;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

FloatArray samples(const LabeledSignalSet& s) {
  const std::size_t n = s.samples_per_channel();
  FloatArray out({s.size(), std::size_t{2}, n});
  auto v = out.mutable_unchecked<3>();
  for (std::size_t r = 0; r < s.size(); ++r)
    for (std::size_t k = 0; k < n; ++k) {
      v(r, 0, k) = s[r].i_channel[k];
      v(r, 1, k) = s[r].q_channel[k];
    }
  return out;
}

py::array_t<std::int64_t> labels(const LabeledSignalSet& s) {
  py::array_t<std::int64_t> out(static_cast<py::ssize_t>(s.size()));
  auto v = out.mutable_unchecked<1>();
  for (std::size_t r = 0; r < s.size(); ++r) v(r) = static_cast<std::int64_t>(s[r].label);
  return out;
}

LabeledSignalSet from_arrays(std::vector<std::string> class_names, const FloatArray& x,
                             const py::array_t<std::int64_t, py::array::forcecast>& y) {
  if (x.ndim() != 3 || x.shape(1) != 2) throw ValidationError("samples must have shape (records, 2, N)");
  if (y.ndim() != 1 || y.shape(0) != x.shape(0)) throw ValidationError("labels must have shape (records,)");
  const auto n = static_cast<std::size_t>(x.shape(2));
  LabeledSignalSet set(std::move(class_names), n);
  auto xv = x.unchecked<3>();
  auto yv = y.unchecked<1>();
  for (py::ssize_t r = 0; r < x.shape(0); ++r) {
    if (yv(r) < 0) throw ValidationError("labels must be non-negative");
    SignalRecord rec;
    rec.label = static_cast<std::size_t>(yv(r));
    for (std::size_t k = 0; k < n; ++k) {
      rec.i_channel.push_back(xv(r, 0, k));
      rec.q_channel.push_back(xv(r, 1, k));
    }
    set.add(std::move(rec));
  }
  return set;
}

py::dict report_dict(const LossReport& r) {
  py::dict d;
  d["iteration"] = r.iteration;
  d["l_td"] = r.l_td;
  d["l_fd"] = r.l_fd;
  d["l_total"] = r.l_total;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Signal dataset distillation core";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<PersistenceError>(m, "PersistenceError", PyExc_OSError);

  py::class_<LabeledSignalSet>(m, "SignalSet")
      .def_static("from_arrays", &from_arrays, py::arg("class_names"), py::arg("samples"), py::arg("labels"),
                  "Build a set from float32 samples of shape (records, 2, N) and integer labels.")
      .def_static("from_bytes", [](const py::bytes& b) {
        const std::string s = b;
        return decode_sigds({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
      })
      .def("to_bytes", [](const LabeledSignalSet& s) {
        const auto bytes = encode_sigds(s);
        return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
      })
      .def("save", [](const LabeledSignalSet& s, const std::filesystem::path& p) { save_sigds(s, p); })
      .def("samples", &samples, "float32 array of shape (records, 2, N)")
      .def("labels", &labels)
      .def("snr_db", [](const LabeledSignalSet& s) {
        std::vector<std::optional<int>> out;
        for (const auto& r : s.records()) out.push_back(r.snr_db);
        return out;
      })
      .def("class_counts", &LabeledSignalSet::class_counts)
      .def("__len__", &LabeledSignalSet::size)
      .def("__eq__", [](const LabeledSignalSet& a, const LabeledSignalSet& b) { return bit_equal(a, b); })
      .def_property_readonly("class_names", &LabeledSignalSet::class_names)
      .def_property_readonly("samples_per_channel", &LabeledSignalSet::samples_per_channel)
      .def("__repr__", [](const LabeledSignalSet& s) {
        std::ostringstream os;
        os << "SignalSet(records=" << s.size() << ", classes=" << s.num_classes() << ", N=" << s.samples_per_channel()
           << ")";
        return os.str();
      });

  py::class_<GenConfig>(m, "GenConfig")
      .def(py::init<>())
      .def_property(
          "schemes",
          [](const GenConfig& g) {
            std::vector<std::string> out;
            for (auto s : g.schemes) out.emplace_back(modulation_name(s));
            return out;
          },
          [](GenConfig& g, const std::vector<std::string>& names) {
            g.schemes.clear();
            for (const auto& n : names) g.schemes.push_back(parse_modulation(n));
          })
      .def_readwrite("n_per_class", &GenConfig::n_per_class)
      .def_readwrite("samples_per_record", &GenConfig::samples_per_record)
      .def_readwrite("samples_per_symbol", &GenConfig::samples_per_symbol)
      .def_readwrite("snr_db_min", &GenConfig::snr_db_min)
      .def_readwrite("snr_db_max", &GenConfig::snr_db_max)
      .def_readwrite("snr_db_step", &GenConfig::snr_db_step)
      .def_readwrite("seed", &GenConfig::seed);

  py::class_<DistillConfig>(m, "DistillConfig")
      .def(py::init<>())
      .def_readwrite("iterations", &DistillConfig::iterations)
      .def_readwrite("eta", &DistillConfig::eta)
      .def_readwrite("alpha", &DistillConfig::alpha)
      .def_readwrite("spc", &DistillConfig::spc)
      .def_readwrite("real_batch_per_class", &DistillConfig::real_batch_per_class)
      .def_property(
          "arch", [](const DistillConfig& c) { return std::string(arch_name(c.arch)); },
          [](DistillConfig& c, const std::string& a) { c.arch = parse_arch(a); })
      .def_readwrite("seed", &DistillConfig::seed)
      .def_readwrite("normalize_spectrum", &DistillConfig::normalize_spectrum)
      .def_readwrite("report_every", &DistillConfig::report_every);

  py::class_<EvalConfig>(m, "EvalConfig")
      .def(py::init<>())
      .def_property(
          "arch", [](const EvalConfig& c) { return std::string(arch_name(c.arch)); },
          [](EvalConfig& c, const std::string& a) { c.arch = parse_arch(a); })
      .def_readwrite("lr", &EvalConfig::lr)
      .def_readwrite("momentum", &EvalConfig::momentum)
      .def_readwrite("batch_size", &EvalConfig::batch_size)
      .def_readwrite("epochs", &EvalConfig::epochs)
      .def_readwrite("n_runs", &EvalConfig::n_runs)
      .def_readwrite("seed", &EvalConfig::seed);

  m.def("generate_dataset", &generate_dataset, py::arg("config"), py::call_guard<py::gil_scoped_release>());
  m.def("split_train_test", &split_train_test, py::arg("set"), py::arg("test_fraction"), py::arg("seed"));
  m.def("load_sigds", [](const std::filesystem::path& p) { return load_sigds(p); }, py::arg("path"));
  m.def(
      "take_per_class", [](const LabeledSignalSet& s, std::size_t spc, std::uint64_t seed) {
        return take_per_class(s, spc, seed).base();
      },
      py::arg("set"), py::arg("spc"), py::arg("seed"));
  m.def(
      "dft_magnitude",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x) {
        if (x.ndim() != 1) throw ValidationError("dft_magnitude expects a 1-D array");
        const auto mag = dft_magnitude(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
        return py::array_t<double>(static_cast<py::ssize_t>(mag.size()), mag.data());
      },
      py::arg("x"), "Unnormalized DFT magnitude |X[k]| of a real sequence.");
  m.def(
      "distill",
      [](const LabeledSignalSet& train, const DistillConfig& cfg, const std::string& method) -> py::tuple {
        const Method meth = parse_method(method);
        if (meth == Method::random) return py::make_tuple(initial_synthetic(train, cfg).base(), py::list());
        DistillResult res = [&] {
          py::gil_scoped_release release;
          return meth == Method::mdm ? mdm_distill(train, cfg) : dm_distill(train, cfg);
        }();
        py::list reports;
        for (const auto& r : res.reports) reports.append(report_dict(r));
        return py::make_tuple(res.synthetic.base(), reports);
      },
      py::arg("train"), py::arg("config"), py::arg("method") = "mdm",
      "Returns (synthetic set, list of loss reports).");
  m.def(
      "evaluate",
      [](const LabeledSignalSet& train, const LabeledSignalSet& test, const EvalConfig& cfg) {
        EvalResult r;
        {
          py::gil_scoped_release release;
          r = evaluate(train, test, cfg);
        }
        py::dict d;
        d["mean_accuracy"] = r.mean_accuracy;
        d["std_accuracy"] = r.std_accuracy;
        d["per_run"] = r.per_run;
        return d;
      },
      py::arg("train"), py::arg("test"), py::arg("config"));
  m.def(
      "run_command",
      [](const std::string& command, const std::filesystem::path& config, const std::vector<std::string>& overrides,
         bool force) {
        const Manifest man = load_manifest(config, overrides);
        RunOptions opts;
        opts.force = force;
        py::gil_scoped_release release;
        if (command == "gen")
          cmd_gen(man, opts);
        else if (command == "distill")
          cmd_distill(man, opts);
        else if (command == "eval")
          cmd_eval(man, opts);
        else if (command == "crossarch")
          cmd_crossarch(man, opts);
        else
          throw ValidationError("unknown command '" + command + "' (expected gen, distill, eval or crossarch)");
      },
      py::arg("command"), py::arg("config"), py::arg("overrides") = std::vector<std::string>{},
      py::arg("force") = false, "Run a CLI command against a manifest file; outputs land in its output_dir.");
}
