// osdd-cli: compile programs to diagrams, run exact or sampling inference,
// and reproduce the benchmark sweeps.
//
// Exit codes: 0 success, 1 user error, 2 internal invariant violation.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "osdd/engine.hpp"
#include "osdd/inference.hpp"
#include "osdd/oracle.hpp"
#include "osdd/sampling.hpp"
#include "osdd/text.hpp"

namespace {

using namespace osdd;
using Clock = std::chrono::steady_clock;
using json = nlohmann::json;

struct InternalError : std::logic_error {
  using std::logic_error::logic_error;
};

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

struct Config {
  std::string program;
  std::string osdd_file;
  std::string query;
  std::string evidence;
  std::string mode;
  std::uint64_t samples = 10000;
  std::uint64_t seed = 0;
  std::uint64_t stride = 0;
  std::string out;
  std::string dot;
  bool rational = false;
  double timeout_s = 0;
  std::string experiment;
};

std::optional<std::string> opt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return s;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path);
  f << text;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Program load_program(const Config& c) {
  if (c.program.empty()) throw Error("--program is required");
  return Program::load(c.program);
}

/// The query, or query and evidence as one conjunction.
Ast joint(const Config& c) {
  Ast q = parse_query(c.query);
  if (c.evidence.empty()) return q;
  return Ast::compound(",", {parse_query(c.evidence), q});
}

Osdd build(Engine& e, const Ast& goal) {
  Osdd d = e.evaluate(goal);
  auto v = validate(d);
  if (!v.empty())
    throw InternalError("diagram for " + goal.str() + " violates " + condition_name(v.front().condition) + " at " +
                        v.front().path + ": " + v.front().detail);
  return d;
}

std::string show(const Rational& r, bool rational) {
  if (rational) {
    std::ostringstream os;
    os << r;
    return os.str();
  }
  return format_double(static_cast<double>(r));
}

int cmd_compile(const Config& c) {
  if (c.query.empty()) throw Error("--query is required");
  Program p = load_program(c);
  EngineOptions eo;
  eo.timeout_s = c.timeout_s;
  Engine e(p, eo);
  const auto t0 = Clock::now();
  Osdd d = build(e, parse_query(c.query));
  const double build_ms = ms_since(t0);
  const std::string text = osdd_text(d, decls_of(p));
  if (c.out.empty()) std::cout << text;
  else write_file(c.out, text);
  if (!c.dot.empty()) {
    std::ostringstream os;
    write_dot(os, d);
    write_file(c.dot, os.str());
  }
  json stats = {{"node_count", internal_node_count(d)}, {"build_ms", build_ms}};
  (c.out.empty() ? std::cerr : std::cout) << stats.dump() << '\n';
  return 0;
}

/// P(d) by the selected exact path.
Rational exact_of(const Osdd& d, const DeclFn& decl, const std::string& mode, const MeasurabilityReport& m) {
  if (mode == "exact-measurable") {
    if (!m.measurable)
      throw Error("diagram is not measurable (first unsaturated edge at " + m.offending_path +
                  "); use --mode exact instead");
    return exact_prob_measurable<Rational>(d, decl);
  }
  return exact_prob<Rational>(d, decl);
}

double exact_double(const Osdd& d, const DeclFn& decl, const std::string& mode) {
  if (mode == "exact-measurable") return exact_prob_measurable<double>(d, decl);
  return exact_prob<double>(d, decl);
}

int cmd_infer(const Config& c) {
  const std::string mode = c.mode.empty() ? "exact" : c.mode;
  if (mode != "exact" && mode != "exact-measurable" && mode != "oracle")
    throw Error("infer mode must be exact, exact-measurable or oracle");
  json report;
  const auto t0 = Clock::now();
  std::optional<Program> program;
  Osdd d, de;
  DeclFn decl;
  OsddFile file;
  if (!c.osdd_file.empty()) {
    if (!c.evidence.empty()) throw Error("--evidence needs --program, not --osdd");
    file = read_osdd(read_file(c.osdd_file));
    d = file.root;
    decl = file.decls();
  } else {
    if (c.query.empty()) throw Error("--query is required");
    program.emplace(load_program(c));
    EngineOptions eo;
    eo.timeout_s = c.timeout_s;
    Engine e(*program, eo);
    d = build(e, joint(c));
    if (!c.evidence.empty()) de = build(e, parse_query(c.evidence));
    decl = decls_of(*program);
  }
  const auto m = measurability(d);
  const std::string exact_mode = mode == "oracle" ? "exact" : mode;
  std::optional<Rational> pr;
  double pd;
  if (c.rational || mode == "oracle") {
    Rational num = exact_of(d, decl, exact_mode, m);
    if (!c.evidence.empty()) {
      Rational den = exact_of(de, decl, exact_mode, measurability(de));
      if (den == 0) throw Error("evidence has probability 0");
      num /= den;
    }
    pr = num;
    pd = static_cast<double>(num);
  } else {
    if (exact_mode == "exact-measurable" && !m.measurable)
      throw Error("diagram is not measurable (first unsaturated edge at " + m.offending_path +
                  "); use --mode exact instead");
    pd = exact_double(d, decl, exact_mode);
    if (!c.evidence.empty()) {
      const double den = exact_double(de, decl, exact_mode);
      if (den == 0) throw Error("evidence has probability 0");
      pd /= den;
    }
  }
  const auto cx = complexity(d, decl);
  report["probability"] = c.rational && pr ? json(show(*pr, true)) : json(pd);
  report["measurable"] = m.measurable;
  report["node_count"] = cx.nodes;
  report["max_free_vars"] = cx.max_free_vars;
  if (mode == "oracle") {
    if (!program) throw Error("--mode oracle needs --program");
    const Rational b = brute_force_prob(*program, c.query, opt(c.evidence));
    const Rational diff = b > *pr ? b - *pr : *pr - b;
    report["oracle"] = c.rational ? json(show(b, true)) : json(static_cast<double>(b));
    report["abs_diff"] = c.rational ? json(show(diff, true)) : json(static_cast<double>(diff));
  }
  report["elapsed_ms"] = ms_since(t0);
  std::cout << report.dump() << '\n';
  return 0;
}

int cmd_sample(const Config& c) {
  if (c.query.empty()) throw Error("--query is required");
  if (c.samples < 1) throw Error("--samples must be at least 1");
  Program p = load_program(c);
  SamplingOptions so;
  so.mode = parse_mode(c.mode.empty() ? "lw" : c.mode);
  so.samples = c.samples;
  so.seed = c.seed;
  so.stride = c.stride;
  so.engine.timeout_s = c.timeout_s;
  std::optional<Ast> ev;
  if (!c.evidence.empty()) ev = parse_query(c.evidence);
  Estimator est(p, parse_query(c.query), ev, so);
  std::ofstream file;
  if (!c.out.empty()) {
    file.open(c.out);
    if (!file) throw Error("cannot write " + c.out);
  }
  std::ostream& csv = c.out.empty() ? std::cout : file;
  write_csv_header(csv);
  const EstimatorState st = est.run([&](const ConvergenceRow& r) { write_csv_row(csv, r, so.mode, so.seed); });
  std::ostream& summary = c.out.empty() ? std::cerr : std::cout;
  summary << "estimate " << (st.estimate() ? format_double(*st.estimate()) : "undefined (no consistent sample)")
          << " variance " << (st.variance() ? format_double(*st.variance()) : "undefined") << " consistent "
          << st.n_consistent << '/' << st.n_total << " rejected " << st.n_rejected << " rng mt19937_64\n";
  return 0;
}

double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 ? xs[n / 2] : (xs[n / 2 - 1] + xs[n / 2]) / 2;
}

int cmd_reproduce(const Config& c) {
  std::string program_path, family;
  std::string (*query)(int) = nullptr;
  if (c.experiment == "birthday") {
    program_path = "birthday.pl";
    query = [](int n) { return "same_birthday(" + std::to_string(n) + ")"; };
  } else if (c.experiment == "palindrome") {
    program_path = "palindrome.pl";
    query = [](int n) { return "evidence(" + std::to_string(n) + ")"; };
  } else {
    throw Error("experiment must be birthday or palindrome");
  }
  const std::string path = c.program.empty() ? std::string(OSDD_SOURCE_DIR) + "/programs/" + program_path : c.program;
  Program p = Program::load(path);
  std::ostringstream table;
  table << "n,nodes,build_ms,prob_ms,probability,status\n";
  std::cout << "n     nodes  build_ms    prob_ms     probability\n";
  for (int n = 6; n <= 16; n += 2) {
    const std::string q = query(n);
    std::vector<double> builds, probs;
    Osdd d;
    std::string status = "ok";
    double value = 0;
    try {
      for (int run = 0; run < 5; ++run) {
        EngineOptions eo;
        eo.timeout_s = c.timeout_s;
        Engine e(p, eo);
        auto t0 = Clock::now();
        d = e.evaluate(q);
        builds.push_back(ms_since(t0));
        t0 = Clock::now();
        value = exact_prob_measurable<double>(d, decls_of(p));
        probs.push_back(ms_since(t0));
      }
    } catch (const LimitError& ex) {
      status = std::string("timeout: ") + ex.what();
    }
    char line[160];
    if (status == "ok") {
      std::snprintf(line, sizeof line, "%-5d %-6zu %-11.3f %-11.3f %.17g\n", n, internal_node_count(d),
                    median(builds), median(probs), value);
      table << n << ',' << internal_node_count(d) << ',' << format_double(median(builds)) << ','
            << format_double(median(probs)) << ',' << format_double(value) << ",ok\n";
    } else {
      std::snprintf(line, sizeof line, "%-5d %s\n", n, status.c_str());
      table << n << ",,,,," << status << '\n';
    }
    std::cout << line << std::flush;
  }
  if (!c.out.empty()) {
    std::filesystem::create_directories(c.out);
    write_file((std::filesystem::path(c.out) / (c.experiment + ".csv")).string(), table.str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ordered symbolic derivation diagrams: compile, infer, sample"};
  app.require_subcommand(1);
  Config c;

  auto add_common = [&](CLI::App* s) {
    s->add_option("--program", c.program, "program file");
    s->add_option("--query", c.query, "ground query atom");
    s->add_option("--timeout-s", c.timeout_s, "evaluation time limit in seconds (0: none)");
  };

  auto* compile = app.add_subcommand("compile", "build the diagram for a query");
  add_common(compile);
  compile->add_option("--out", c.out, "diagram text file (default: stdout)");
  compile->add_option("--dot", c.dot, "Graphviz output file");

  auto* infer = app.add_subcommand("infer", "exact probability of a query");
  add_common(infer);
  infer->add_option("--osdd", c.osdd_file, "read a compiled diagram instead of a program");
  infer->add_option("--evidence", c.evidence, "ground evidence atom");
  infer->add_option("--mode", c.mode, "exact | exact-measurable | oracle");
  infer->add_flag("--rational", c.rational, "exact rational arithmetic");

  auto* sample = app.add_subcommand("sample", "estimate a probability by sampling");
  add_common(sample);
  sample->add_option("--evidence", c.evidence, "ground evidence atom");
  sample->add_option("--mode", c.mode, "lw | independent");
  sample->add_option("--samples", c.samples, "sample budget");
  sample->add_option("--seed", c.seed, "random seed");
  sample->add_option("--stride", c.stride, "write a CSV row every this many samples");
  sample->add_option("--out", c.out, "CSV file (default: stdout)");

  auto* reproduce = app.add_subcommand("reproduce", "size sweeps with build and inference times");
  reproduce->add_option("experiment", c.experiment, "birthday | palindrome")->required();
  reproduce->add_option("--program", c.program, "program file (default: the bundled one)");
  reproduce->add_option("--out", c.out, "directory for the CSV table");
  reproduce->add_option("--timeout-s", c.timeout_s, "per-size time limit in seconds (0: none)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*compile) return cmd_compile(c);
    if (*infer) return cmd_infer(c);
    if (*sample) return cmd_sample(c);
    if (*reproduce) return cmd_reproduce(c);
  } catch (const InternalError& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
