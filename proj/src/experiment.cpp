#include "sigdistill/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "sigdistill/error.hpp"
#include "sigdistill/plot.hpp"

namespace sigdistill {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string_view method_name(Method m) {
  switch (m) {
    case Method::random: return "random";
    case Method::dm: return "dm";
    case Method::mdm: return "mdm";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  for (auto m : {Method::random, Method::dm, Method::mdm})
    if (method_name(m) == name) return m;
  throw ValidationError("unknown method '" + std::string(name) + "' (expected random, dm or mdm)");
}

Manifest::Manifest() { gen.n_per_class = 1250; }

fs::path Manifest::resolved_train() const { return train_path ? *train_path : output_dir / "train.sigds"; }
fs::path Manifest::resolved_test() const { return test_path ? *test_path : output_dir / "test.sigds"; }

DistillConfig Manifest::effective_distill() const {
  auto d = distill;
  if (method == Method::dm) d.alpha = 0.0;
  return d;
}

void Manifest::validate() const {
  gen.validate();
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ValidationError("gen.test_fraction must lie in (0, 1)");
  distill.validate();
  eval.validate();
  if (eval_methods.empty()) throw ValidationError("eval.methods must not be empty");
  if (crossarch_distill.empty() || crossarch_eval.empty())
    throw ValidationError("crossarch architecture lists must not be empty");
}

namespace {

// ---- source positions -------------------------------------------------------

// Maps "/block/key" pointers of object keys to 1-based line numbers by lexing
// the raw text. Only called on text that nlohmann has already accepted.
std::map<std::string, std::size_t> key_lines(std::string_view text) {
  struct Frame {
    bool object;
    std::string key;
    std::size_t index = 0;
  };
  std::map<std::string, std::size_t> lines;
  std::vector<Frame> stack;
  std::size_t line = 1;
  auto pointer = [&](const std::string& leaf) {
    std::string p;
    for (const auto& f : stack) {
      if (&f == &stack.back()) break;
      p += "/" + (f.object ? f.key : std::to_string(f.index));
    }
    return p + "/" + leaf;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\n') {
      ++line;
    } else if (c == '{' || c == '[') {
      stack.push_back({c == '{', {}, 0});
    } else if (c == '}' || c == ']') {
      if (!stack.empty()) stack.pop_back();
    } else if (c == ',') {
      if (!stack.empty() && !stack.back().object) ++stack.back().index;
    } else if (c == '"') {
      std::string s;
      const std::size_t start_line = line;
      for (++i; i < text.size() && text[i] != '"'; ++i) {
        if (text[i] == '\\' && i + 1 < text.size()) ++i;
        s += text[i];
      }
      std::size_t j = i + 1;
      while (j < text.size() && (text[j] == ' ' || text[j] == '\t' || text[j] == '\r' || text[j] == '\n')) ++j;
      if (j < text.size() && text[j] == ':' && !stack.empty() && stack.back().object) {
        stack.back().key = s;
        lines.emplace(pointer(s), start_line);
      }
    }
  }
  return lines;
}

std::size_t line_of_offset(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(offset), '\n'));
}

class Reader {
 public:
  Reader(std::string source, std::map<std::string, std::size_t> lines, std::set<std::string> overridden)
      : source_(std::move(source)), lines_(std::move(lines)), overridden_(std::move(overridden)) {}

  [[noreturn]] void fail(const std::string& pointer, const std::string& msg) const {
    std::string where = source_;
    if (overridden_.count(pointer))
      where += ": override";
    else if (auto it = lines_.find(pointer); it != lines_.end())
      where += ":" + std::to_string(it->second);
    else if (auto parent = lines_.find(pointer.substr(0, pointer.rfind('/'))); parent != lines_.end())
      where += ":" + std::to_string(parent->second);
    throw ParseError(ParseError::Kind::config, where + ": " + dotted(pointer) + ": " + msg);
  }

  static std::string dotted(const std::string& pointer) {
    std::string s = pointer.substr(1);
    std::replace(s.begin(), s.end(), '/', '.');
    return s.empty() ? "(root)" : s;
  }

  void only_keys(const json& obj, const std::string& at, std::initializer_list<const char*> allowed) const {
    if (!obj.is_object()) fail(at, "expected an object");
    for (const auto& [k, v] : obj.items()) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || k == a;
      if (!ok) fail(at + "/" + k, "unknown key");
    }
  }

  template <typename T>
  void read(const json& obj, const std::string& at, const char* key, T& out) const {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    const std::string p = at + "/" + key;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) fail(p, "expected true or false");
        out = v.get<bool>();
      } else if constexpr (std::is_integral_v<T>) {
        if (v.is_number_float()) {
          const double d = v.get<double>();
          if (d != std::floor(d)) fail(p, "expected an integer, got " + v.dump());
        } else if (!v.is_number_integer()) {
          fail(p, "expected an integer, got " + v.dump());
        }
        if (std::is_unsigned_v<T> && v.is_number_integer() && v.get<long long>() < 0 && !v.is_number_unsigned())
          fail(p, "expected a non-negative integer, got " + v.dump());
        out = v.get<T>();
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) fail(p, "expected a number, got " + v.dump());
        out = v.get<T>();
      } else {
        if (!v.is_string()) fail(p, "expected a string, got " + v.dump());
        out = v.get<std::string>();
      }
    } catch (const json::exception& e) {
      fail(p, e.what());
    }
  }

  template <typename F>
  auto parse_enum(const json& obj, const std::string& at, const char* key, F parse) const
      -> std::optional<decltype(parse(std::string_view{}))> {
    if (!obj.contains(key)) return std::nullopt;
    std::string s;
    read(obj, at, key, s);
    try {
      return parse(s);
    } catch (const ValidationError& e) {
      fail(at + "/" + key, e.what());
    }
  }

  template <typename F>
  auto parse_list(const json& obj, const std::string& at, const char* key, F parse) const
      -> std::optional<std::vector<decltype(parse(std::string_view{}))>> {
    if (!obj.contains(key)) return std::nullopt;
    const auto& v = obj.at(key);
    const std::string p = at + "/" + key;
    if (!v.is_array()) fail(p, "expected a list of names");
    std::vector<decltype(parse(std::string_view{}))> out;
    for (const auto& item : v) {
      if (!item.is_string()) fail(p, "expected a list of names, found " + item.dump());
      try {
        out.push_back(parse(item.get<std::string>()));
      } catch (const ValidationError& e) {
        fail(p, e.what());
      }
    }
    return out;
  }

 private:
  std::string source_;
  std::map<std::string, std::size_t> lines_;
  std::set<std::string> overridden_;
};

void apply_override(json& doc, const std::string& assignment, std::set<std::string>& overridden) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ParseError(ParseError::Kind::config, "override '" + assignment + "' must look like key.path=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  json* node = &doc;
  std::string pointer;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ParseError(ParseError::Kind::config, "override '" + assignment + "' has an empty key");
    pointer += "/" + part;
    if (!node->is_object()) throw ParseError(ParseError::Kind::config, "override '" + assignment + "' does not name an object field");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
  overridden.insert(pointer);
}

json arch_list(const std::vector<Arch>& v) {
  json a = json::array();
  for (auto x : v) a.push_back(std::string(arch_name(x)));
  return a;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw PersistenceError("cannot open for writing: " + path.string());
  out << text;
  out.flush();
  if (!out) throw PersistenceError("write failed: " + path.string());
}

void prepare_outputs(const Manifest& m, const std::vector<fs::path>& outputs, const RunOptions& opts) {
  for (const auto& p : outputs)
    if (fs::exists(p) && !opts.force)
      throw ValidationError("refusing to overwrite " + p.string() + " (pass --force to replace it)");
  std::error_code ec;
  fs::create_directories(m.output_dir, ec);
  if (ec) throw PersistenceError("cannot create output directory " + m.output_dir.string() + ": " + ec.message());
  for (const auto& p : outputs) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
    if (ec) throw PersistenceError("cannot create directory " + p.parent_path().string() + ": " + ec.message());
  }
  write_text(m.output_dir / kManifestCopy, m.to_json());
}

LabeledSignalSet load_existing(const fs::path& p, const char* what) {
  if (!fs::exists(p))
    throw ValidationError(std::string(what) + " not found: expected " + p.string());
  return load_sigds(p);
}

void log_line(const RunOptions& opts, const std::string& s) {
  if (auto* l = opts.log) *l << s << '\n' << std::flush;
}

std::string result_row(const EvalResult& r) {
  std::string s = format_number(r.mean_accuracy) + "," + format_number(r.std_accuracy);
  for (double a : r.per_run) s += "," + format_number(a);
  return s;
}

std::string run_columns(std::size_t n) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s += ",run_" + std::to_string(i + 1);
  return s;
}

std::string pm(const EvalResult& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << r.mean_accuracy << " +- " << r.std_accuracy;
  return os.str();
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string loss_csv(const std::vector<LossReport>& reports) {
  std::string s = "iter,l_td,l_fd,l_total\n";
  for (const auto& r : reports)
    s += std::to_string(r.iteration) + "," + format_number(r.l_td) + "," + format_number(r.l_fd) + "," +
         format_number(r.l_total) + "\n";
  return s;
}

std::string Manifest::to_json() const {
  json j;
  j["output_dir"] = output_dir.generic_string();
  j["method"] = std::string(method_name(method));
  json g;
  json schemes = json::array();
  for (auto s : gen.schemes) schemes.push_back(std::string(modulation_name(s)));
  g["schemes"] = schemes;
  g["n_per_class"] = gen.n_per_class;
  g["samples_per_record"] = gen.samples_per_record;
  g["samples_per_symbol"] = gen.samples_per_symbol;
  g["snr_db_min"] = gen.snr_db_min;
  g["snr_db_max"] = gen.snr_db_max;
  g["snr_db_step"] = gen.snr_db_step;
  g["test_fraction"] = test_fraction;
  g["seed"] = gen.seed;
  j["gen"] = g;
  j["data"] = {{"train", resolved_train().generic_string()}, {"test", resolved_test().generic_string()}};
  j["distill"] = {{"iterations", distill.iterations},
                  {"eta", distill.eta},
                  {"alpha", distill.alpha},
                  {"spc", distill.spc},
                  {"real_batch_per_class", distill.real_batch_per_class},
                  {"arch", std::string(arch_name(distill.arch))},
                  {"seed", distill.seed},
                  {"normalize_spectrum", distill.normalize_spectrum},
                  {"report_every", distill.report_every}};
  json methods = json::array();
  for (auto x : eval_methods) methods.push_back(std::string(method_name(x)));
  j["eval"] = {{"arch", std::string(arch_name(eval.arch))},
               {"lr", eval.lr},
               {"momentum", eval.momentum},
               {"batch_size", eval.batch_size},
               {"epochs", eval.epochs},
               {"n_runs", eval.n_runs},
               {"seed", eval.seed},
               {"methods", methods}};
  j["crossarch"] = {{"distill_archs", arch_list(crossarch_distill)}, {"eval_archs", arch_list(crossarch_eval)}};
  return j.dump(2) + "\n";
}

Manifest parse_manifest(std::string_view text, const std::string& source,
                        const std::vector<std::string>& overrides, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end(), nullptr, true, true);
  } catch (const json::parse_error& e) {
    const std::size_t line = line_of_offset(text, e.byte > 0 ? e.byte - 1 : 0);
    std::string what = e.what();
    if (auto pos = what.find("; last read"); pos != std::string::npos) what = what.substr(pos + 2);
    throw ParseError(ParseError::Kind::config, source + ":" + std::to_string(line) + ": malformed JSON: " + what);
  }
  if (!doc.is_object())
    throw ParseError(ParseError::Kind::config, source + ":1: the manifest must be a JSON object");

  std::set<std::string> overridden;
  for (const auto& o : overrides) apply_override(doc, o, overridden);
  const Reader in(source, key_lines(text), overridden);

  in.only_keys(doc, "", {"output_dir", "method", "gen", "data", "distill", "eval", "crossarch"});
  Manifest m;
  auto resolve = [&](const std::string& p) {
    fs::path path(p);
    return (path.is_relative() && !base_dir.empty() ? base_dir / path : path).lexically_normal();
  };

  std::string s;
  if (doc.contains("output_dir")) {
    in.read(doc, "", "output_dir", s);
    if (s.empty()) in.fail("/output_dir", "must not be empty");
    m.output_dir = resolve(s);
  }
  if (auto v = in.parse_enum(doc, "", "method", parse_method)) m.method = *v;

  if (doc.contains("gen")) {
    const auto& g = doc["gen"];
    in.only_keys(g, "/gen", {"schemes", "n_per_class", "samples_per_record", "samples_per_symbol", "snr_db_min",
                             "snr_db_max", "snr_db_step", "test_fraction", "seed"});
    if (auto v = in.parse_list(g, "/gen", "schemes", parse_modulation)) m.gen.schemes = *v;
    in.read(g, "/gen", "n_per_class", m.gen.n_per_class);
    in.read(g, "/gen", "samples_per_record", m.gen.samples_per_record);
    in.read(g, "/gen", "samples_per_symbol", m.gen.samples_per_symbol);
    in.read(g, "/gen", "snr_db_min", m.gen.snr_db_min);
    in.read(g, "/gen", "snr_db_max", m.gen.snr_db_max);
    in.read(g, "/gen", "snr_db_step", m.gen.snr_db_step);
    in.read(g, "/gen", "test_fraction", m.test_fraction);
    in.read(g, "/gen", "seed", m.gen.seed);
  }
  if (doc.contains("data")) {
    const auto& d = doc["data"];
    in.only_keys(d, "/data", {"train", "test"});
    if (d.contains("train")) {
      in.read(d, "/data", "train", s);
      m.train_path = resolve(s);
    }
    if (d.contains("test")) {
      in.read(d, "/data", "test", s);
      m.test_path = resolve(s);
    }
  }
  if (doc.contains("distill")) {
    const auto& d = doc["distill"];
    in.only_keys(d, "/distill", {"iterations", "eta", "alpha", "spc", "real_batch_per_class", "arch", "seed",
                                 "normalize_spectrum", "report_every"});
    in.read(d, "/distill", "iterations", m.distill.iterations);
    in.read(d, "/distill", "eta", m.distill.eta);
    in.read(d, "/distill", "alpha", m.distill.alpha);
    in.read(d, "/distill", "spc", m.distill.spc);
    in.read(d, "/distill", "real_batch_per_class", m.distill.real_batch_per_class);
    if (auto v = in.parse_enum(d, "/distill", "arch", parse_arch)) m.distill.arch = *v;
    in.read(d, "/distill", "seed", m.distill.seed);
    in.read(d, "/distill", "normalize_spectrum", m.distill.normalize_spectrum);
    in.read(d, "/distill", "report_every", m.distill.report_every);
  }
  if (doc.contains("eval")) {
    const auto& e = doc["eval"];
    in.only_keys(e, "/eval", {"arch", "lr", "momentum", "batch_size", "epochs", "n_runs", "seed", "methods"});
    if (auto v = in.parse_enum(e, "/eval", "arch", parse_arch)) m.eval.arch = *v;
    in.read(e, "/eval", "lr", m.eval.lr);
    in.read(e, "/eval", "momentum", m.eval.momentum);
    in.read(e, "/eval", "batch_size", m.eval.batch_size);
    in.read(e, "/eval", "epochs", m.eval.epochs);
    in.read(e, "/eval", "n_runs", m.eval.n_runs);
    in.read(e, "/eval", "seed", m.eval.seed);
    if (auto v = in.parse_list(e, "/eval", "methods", parse_method)) m.eval_methods = *v;
  }
  if (doc.contains("crossarch")) {
    const auto& c = doc["crossarch"];
    in.only_keys(c, "/crossarch", {"distill_archs", "eval_archs"});
    if (auto v = in.parse_list(c, "/crossarch", "distill_archs", parse_arch)) m.crossarch_distill = *v;
    if (auto v = in.parse_list(c, "/crossarch", "eval_archs", parse_arch)) m.crossarch_eval = *v;
  }

  try {
    m.validate();
  } catch (const ValidationError& e) {
    throw ParseError(ParseError::Kind::config, source + ": " + e.what());
  }
  return m;
}

Manifest load_manifest(const fs::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PersistenceError("cannot open manifest " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str(), path.string(), overrides, path.parent_path());
}

std::string synth_filename(Method m, std::size_t spc) {
  return "synth_" + std::string(method_name(m)) + "_" + std::to_string(spc) + ".sigds";
}
std::string eval_filename(Arch a, std::size_t spc) {
  return "eval_" + std::string(arch_name(a)) + "_" + std::to_string(spc) + ".csv";
}
std::string crossarch_filename(Arch a) { return "crossarch_" + std::string(arch_name(a)) + ".csv"; }

void cmd_gen(const Manifest& m, const RunOptions& opts) {
  m.validate();
  const auto train_p = m.resolved_train(), test_p = m.resolved_test();
  prepare_outputs(m, {train_p, test_p}, opts);
  log_line(opts, "generating " + std::to_string(m.gen.schemes.size()) + " classes x " +
                     std::to_string(m.gen.n_per_class) + " records");
  const auto all = generate_dataset(m.gen);
  const auto [train, test] = split_train_test(all, m.test_fraction, m.gen.seed);
  save_sigds(train, train_p);
  save_sigds(test, test_p);
  if (auto* o = opts.out)
    *o << "wrote " << train_p.string() << " (" << train.size() << " records) and " << test_p.string() << " ("
       << test.size() << " records)\n";
}

fs::path cmd_distill(const Manifest& m, const RunOptions& opts) {
  m.validate();
  const auto cfg = m.effective_distill();
  const auto synth_p = m.output_dir / synth_filename(m.method, cfg.spc);
  const auto loss_p = m.output_dir / kLossFilename;
  const auto train = load_existing(m.resolved_train(), "training set");
  // loss.csv traces the latest distillation; only the synthetic set is guarded
  // so that the three methods can share one output directory.
  prepare_outputs(m, {synth_p}, opts);

  std::vector<LossReport> reports;
  std::optional<SyntheticSet> synth;
  if (m.method == Method::random) {
    synth = initial_synthetic(train, cfg);
  } else {
    const auto progress = [&](const LossReport& r) {
      std::ostringstream os;
      os << "iter " << r.iteration << "  l_td " << r.l_td << "  l_fd " << r.l_fd << "  l_total " << r.l_total;
      log_line(opts, os.str());
    };
    auto result = m.method == Method::mdm ? mdm_distill(train, cfg, progress) : dm_distill(train, cfg, progress);
    synth = std::move(result.synthetic);
    reports = std::move(result.reports);
  }
  save_sigds(synth->base(), synth_p);
  write_text(loss_p, loss_csv(reports));
  if (auto* o = opts.out) *o << "wrote " << synth_p.string() << " and " << loss_p.string() << "\n";
  return synth_p;
}

std::vector<EvalRow> cmd_eval(const Manifest& m, const RunOptions& opts) {
  m.validate();
  const std::size_t spc = m.distill.spc;
  const auto out_p = m.output_dir / eval_filename(m.eval.arch, spc);
  const auto test = load_existing(m.resolved_test(), "test set");
  std::vector<std::pair<Method, LabeledSignalSet>> inputs;
  for (auto method : m.eval_methods)
    inputs.emplace_back(method, load_existing(m.output_dir / synth_filename(method, spc),
                                              ("synthetic set for method " + std::string(method_name(method))).c_str()));
  prepare_outputs(m, {out_p}, opts);

  std::vector<EvalRow> rows;
  std::string csv = "method,arch,spc,mean_accuracy,std_accuracy" + run_columns(m.eval.n_runs) + "\n";
  for (const auto& [method, set] : inputs) {
    log_line(opts, "evaluating " + std::string(method_name(method)) + " on " + std::string(arch_name(m.eval.arch)));
    const SyntheticSet synth(set, spc);
    auto r = evaluate(synth, test, m.eval);
    csv += std::string(method_name(method)) + "," + std::string(arch_name(m.eval.arch)) + "," +
           std::to_string(spc) + "," + result_row(r) + "\n";
    rows.push_back({method, std::move(r)});
  }
  write_text(out_p, csv);
  if (auto* o = opts.out) {
    *o << "accuracy (%) on " << arch_name(m.eval.arch) << ", spc " << spc << ", " << m.eval.n_runs << " runs\n";
    for (const auto& row : rows) *o << "  " << std::left << std::setw(8) << method_name(row.method) << pm(row.result) << "\n";
    *o << "wrote " << out_p.string() << "\n";
  }
  return rows;
}

CrossArchMatrix cmd_crossarch(const Manifest& m, const RunOptions& opts) {
  m.validate();
  std::vector<fs::path> outputs;
  for (auto c : m.crossarch_distill) {
    outputs.push_back(m.output_dir / crossarch_filename(c));
    outputs.push_back(m.output_dir / ("synth_crossarch_" + std::string(arch_name(c)) + "_" +
                                      std::to_string(m.distill.spc) + ".sigds"));
  }
  const auto train = load_existing(m.resolved_train(), "training set");
  const auto test = load_existing(m.resolved_test(), "test set");
  prepare_outputs(m, outputs, opts);

  log_line(opts, "distilling with mdm on " + std::to_string(m.crossarch_distill.size()) + " architecture(s)");
  auto matrix = cross_arch_matrix(train, test, m.crossarch_distill, m.crossarch_eval, m.distill, m.eval);
  for (std::size_t i = 0; i < matrix.distill_archs.size(); ++i) {
    std::string csv = "distill_arch,eval_arch,spc,mean_accuracy,std_accuracy" + run_columns(m.eval.n_runs) + "\n";
    for (std::size_t j = 0; j < matrix.eval_archs.size(); ++j)
      csv += std::string(arch_name(matrix.distill_archs[i])) + "," + std::string(arch_name(matrix.eval_archs[j])) +
             "," + std::to_string(m.distill.spc) + "," + result_row(matrix.cells[i][j]) + "\n";
    write_text(outputs[2 * i], csv);
    save_sigds(matrix.synthetic[i].base(), outputs[2 * i + 1]);
  }
  if (auto* o = opts.out) {
    *o << std::left << std::setw(16) << "C \\ T";
    for (auto t : matrix.eval_archs) *o << std::setw(18) << arch_name(t);
    *o << "\n";
    for (std::size_t i = 0; i < matrix.distill_archs.size(); ++i) {
      *o << std::setw(16) << arch_name(matrix.distill_archs[i]);
      for (const auto& cell : matrix.cells[i]) *o << std::setw(18) << pm(cell);
      *o << "\n";
    }
  }
  return matrix;
}

void cmd_plot(const PlotRequest& req, const RunOptions& opts) {
  if (req.records == 0) throw ValidationError("plot: --records must be at least 1");
  if (fs::exists(req.out) && !opts.force)
    throw ValidationError("refusing to overwrite " + req.out.string() + " (pass --force to replace it)");
  auto pick = [&](const fs::path& path, const char* tag) {
    const auto set = load_existing(path, "dataset");
    const auto c = set.class_index(req.class_name);
    if (!c) {
      std::string names;
      for (const auto& n : set.class_names()) names += (names.empty() ? "" : ", ") + n;
      throw ValidationError("unknown class '" + req.class_name + "' in " + path.string() + " (available: " + names + ")");
    }
    std::vector<PlotRow> rows;
    for (const auto& r : set.records()) {
      if (r.label != *c) continue;
      rows.push_back({std::string(tag) + " " + req.class_name + " #" + std::to_string(rows.size() + 1) + " (" +
                          path.filename().string() + ")",
                      r});
      if (rows.size() == req.records) break;
    }
    return rows;
  };
  auto rows = pick(req.dataset, req.compare ? "real" : "");
  if (req.compare) {
    auto bottom = pick(*req.compare, "synthetic");
    rows.insert(rows.end(), bottom.begin(), bottom.end());
  }
  if (req.out.has_parent_path()) fs::create_directories(req.out.parent_path());
  write_text(req.out, render_signal_figure(rows));
  if (auto* o = opts.out) *o << "wrote " << req.out.string() << " (" << rows.size() << " records)\n";
}

}  // namespace sigdistill
