#include <algorithm>
#include <charconv>
#include <cctype>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

#include "escape/harness.hpp"

namespace escape {

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

[[noreturn]] void bad(const std::string& key, const std::string& value, const std::string& why) {
  throw ConfigError("config key '" + key + "' = '" + value + "': " + why);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) bad(key, v, "trailing characters");
    return d;
  } catch (const std::logic_error&) {
    bad(key, v, "not a number");
  }
}

std::int64_t to_int(const std::string& key, const std::string& v) {
  std::int64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) bad(key, v, "not an integer");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad(key, v, "expected true/false");
}

std::vector<std::uint64_t> seed_range(std::uint64_t first, std::size_t n) {
  std::vector<std::uint64_t> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = first + i;
  return s;
}

std::string canonical_name(std::string n) {
  if (n.rfind("exp_", 0) == 0) n = n.substr(4);
  if (n == "lemmas" || n == "check") n = "lemma_checks";
  return n;
}

}  // namespace

Method parse_method(const std::string& name) {
  std::string n = name;
  std::transform(n.begin(), n.end(), n.begin(), [](unsigned char c) { return std::tolower(c); });
  std::replace(n.begin(), n.end(), '-', '_');
  if (n == "gd") return Method::GD;
  if (n == "psd") return Method::PSD;
  if (n == "psd_probe" || n == "probe") return Method::PSDProbe;
  if (n == "pgd") return Method::PGD;
  throw InvalidArgument("unknown method: " + name);
}

std::string method_name(Method m) {
  switch (m) {
    case Method::GD: return "GD";
    case Method::PSD: return "PSD";
    case Method::PSDProbe: return "PSD-Probe";
    case Method::PGD: return "PGD";
  }
  return "unknown";
}

ExperimentSpec default_spec(const std::string& raw_name) {
  const std::string name = canonical_name(raw_name);
  ExperimentSpec s;
  s.name = name;
  s.delta_fp = default_delta_fp();
  if (name == "dimension_scaling") {
    s.dims = {10, 50, 100, 500, 1000};
    s.seeds = seed_range(1, 10);
    s.init = "index1";
    s.methods = {Method::PSD};
  } else if (name == "convergence") {
    s.problems = {{Family::SeparableQuartic, 10},
                  {Family::SeparableQuartic, 100},
                  {Family::Rosenbrock, 10}};
    s.seeds = seed_range(1, 50);
    s.init = "saddle";
    s.early_exit = true;
    s.methods = {Method::GD, Method::PSD, Method::PSDProbe, Method::PGD};
  } else if (name == "success_rate") {
    s.dims = {100};
    s.seeds = seed_range(1, 100);
    s.init = "origin";
    s.methods = {Method::PSD};
  } else if (name == "noise_robustness") {
    s.dims = {100};
    s.seeds = seed_range(1, 50);
    s.init = "origin";
    s.early_exit = true;
    s.sigma_ratios = {0.0, 1.0, 10.0, 100.0};
    s.methods = {Method::PSD};
  } else if (name == "lemma_checks") {
    s.seeds = {1};
  } else {
    throw ConfigError("unknown experiment: " + raw_name);
  }
  return s;
}

ExperimentSpec parse_spec(const std::string& text, const std::string& name) {
  std::vector<std::pair<std::string, std::string>> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  std::string exp = name;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (key == "exp" || key == "name") {
      if (!name.empty() && canonical_name(value) != canonical_name(name))
        throw ConfigError("config names experiment '" + value + "' but '" + name +
                          "' was requested");
      exp = value;
      continue;
    }
    kv.emplace_back(std::move(key), std::move(value));
  }
  if (exp.empty()) throw ConfigError("no experiment named (set exp = ...)");

  ExperimentSpec s = default_spec(exp);
  std::optional<std::size_t> num_seeds;
  std::optional<std::uint64_t> seed_base;
  std::optional<std::string> family_key;
  for (const auto& [key, v] : kv) {
    if (key == "family") {
      try {
        s.family = parse_family(v);
      } catch (const InvalidArgument& e) {
        bad(key, v, e.what());
      }
      family_key = v;
    } else if (key == "dims" || key == "dim") {
      s.dims.clear();
      for (const auto& d : split_list(v)) s.dims.push_back(static_cast<int>(to_int(key, d)));
    } else if (key == "problems") {
      s.problems.clear();
      for (const auto& item : split_list(v)) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) bad(key, v, "expected family:dim entries");
        ProblemRef ref;
        try {
          ref.family = parse_family(trim(item.substr(0, colon)));
        } catch (const InvalidArgument& e) {
          bad(key, v, e.what());
        }
        ref.dim = static_cast<int>(to_int(key, trim(item.substr(colon + 1))));
        s.problems.push_back(ref);
      }
    } else if (key == "epsilon" || key == "eps") {
      s.epsilon = to_double(key, v);
    } else if (key == "delta") {
      s.delta = to_double(key, v);
    } else if (key == "seeds") {
      s.seeds.clear();
      for (const auto& t : split_list(v)) s.seeds.push_back(static_cast<std::uint64_t>(to_int(key, t)));
    } else if (key == "num_seeds") {
      num_seeds = static_cast<std::size_t>(to_int(key, v));
    } else if (key == "seed_base") {
      seed_base = static_cast<std::uint64_t>(to_int(key, v));
    } else if (key == "init") {
      s.init = v;
    } else if (key == "early_exit") {
      s.early_exit = to_bool(key, v);
    } else if (key == "iteration_cap") {
      s.iteration_cap = to_int(key, v);
    } else if (key == "methods") {
      s.methods.clear();
      for (const auto& m : split_list(v)) {
        try {
          s.methods.push_back(parse_method(m));
        } catch (const InvalidArgument& e) {
          bad(key, v, e.what());
        }
      }
    } else if (key == "sigma_ratios") {
      s.sigma_ratios.clear();
      for (const auto& t : split_list(v)) s.sigma_ratios.push_back(to_double(key, t));
    } else if (key == "delta_fp") {
      s.delta_fp = to_double(key, v);
    } else if (key == "resamples") {
      s.resamples = static_cast<int>(to_int(key, v));
    } else if (key == "coupling") {
      s.family_params.coupling = to_double(key, v);
    } else if (key == "spectrum_min") {
      s.family_params.spectrum_min = to_double(key, v);
    } else if (key == "spectrum_max") {
      s.family_params.spectrum_max = to_double(key, v);
    } else if (key == "quadratic_seed") {
      s.family_params.quadratic_seed = static_cast<std::uint64_t>(to_int(key, v));
    } else if (key == "ell") {
      s.family_params.ell_override = to_double(key, v);
    } else if (key == "rho") {
      s.family_params.rho_override = to_double(key, v);
    } else if (key == "trace_stride") {
      s.trace_stride = static_cast<int>(to_int(key, v));
    } else if (key == "jobs") {
      s.jobs = static_cast<int>(to_int(key, v));
    } else if (key == "output_dir" || key == "out") {
      s.output_dir = v;
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  if (num_seeds || seed_base) {
    const std::size_t n = num_seeds.value_or(s.seeds.size());
    s.seeds = seed_range(seed_base.value_or(s.seeds.empty() ? 1 : s.seeds.front()), n);
  }
  // A family key on a convergence config replaces the default problem list.
  if (family_key && s.name == "convergence" &&
      std::none_of(kv.begin(), kv.end(), [](const auto& p) { return p.first == "problems"; })) {
    s.problems.clear();
    for (int d : s.dims.empty() ? std::vector<int>{10} : s.dims) s.problems.push_back({s.family, d});
  }
  validate_spec(s);
  return s;
}

ExperimentSpec load_spec(const std::filesystem::path& file, const std::string& name) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read config file " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_spec(ss.str(), name);
}

void validate_spec(const ExperimentSpec& s) {
  const auto check = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  check(!s.seeds.empty(), "seeds must be non-empty");
  check(std::set<std::uint64_t>(s.seeds.begin(), s.seeds.end()).size() == s.seeds.size(),
        "seeds must be distinct");
  check(s.epsilon > 0.0, "epsilon must be positive");
  check(s.delta > 0.0 && s.delta <= 1.0, "delta must lie in (0, 1]");
  check(s.iteration_cap > 0, "iteration_cap must be positive");
  check(s.resamples >= 1, "resamples must be >= 1");
  check(s.trace_stride >= 0, "trace_stride must be >= 0");
  check(s.jobs >= 1, "jobs must be >= 1");
  check(s.delta_fp > 0.0 && s.delta_fp < 1.0, "delta_fp must lie in (0, 1)");
  for (int d : s.dims) check(d >= 1, "dims must be >= 1");
  for (const auto& p : s.problems) check(p.dim >= 1, "problem dims must be >= 1");
  for (double r : s.sigma_ratios) check(r >= 0.0, "sigma_ratios must be >= 0");
  if (s.name == "convergence") check(!s.problems.empty(), "convergence needs problems");
  if (s.name == "dimension_scaling" || s.name == "success_rate" || s.name == "noise_robustness")
    check(!s.dims.empty(), s.name + " needs dims");
  if (s.name == "noise_robustness") check(!s.sigma_ratios.empty(), "noise_robustness needs sigma_ratios");
  if (s.init != "saddle") {
    try {
      parse_start(s.init);
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("init: ") + e.what());
    }
  }
}

}  // namespace escape
