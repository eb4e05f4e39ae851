#include "cateselect/config.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "cateselect/io.hpp"

namespace cateselect {

using nlohmann::json;

namespace {

template <typename T, typename Fn>
json names(const std::vector<T>& v, Fn&& fn) {
  json out = json::array();
  for (const auto& x : v) out.push_back(fn(x));
  return out;
}

json to_json(const RunConfig& c) {
  const auto& bp = c.base_params;
  json j;
  j["seed"] = c.seed;
  j["jobs"] = c.jobs;
  j["dgp"] = {{"rho", c.dgp.rho},
              {"xi", c.dgp.xi},
              {"missing_ratio", c.dgp.missing_ratio},
              {"coeff_p", c.dgp.coeff_p},
              {"noise_sd", c.dgp.noise_sd},
              {"treat_offset", c.dgp.treat_offset},
              {"interaction_order", c.dgp.interaction_order},
              {"n", c.dgp.n},
              {"d", c.dgp.d},
              {"covariate_csv", c.dgp.covariate_csv ? c.dgp.covariate_csv->string() : std::string()}};
  j["split"] = {{"train", c.split.train}, {"valid", c.split.valid}, {"test", c.split.test}};
  j["pool"] = {{"learners", names(c.learners, [](LearnerKind k) { return to_string(k); })},
               {"bases", names(c.bases, [](BaseKind k) { return to_string(k); })}};
  j["base_params"] = {
      {"ridge", {{"alpha", bp.ridge.alpha}}},
      {"logistic", {{"l2", bp.logistic.l2}, {"max_iter", bp.logistic.max_iter}}},
      {"knn", {{"k", bp.knn.k}}},
      {"boosted_trees",
       {{"rounds", bp.trees.rounds},
        {"depth", bp.trees.depth},
        {"learning_rate", bp.trees.learning_rate},
        {"l2_leaf", bp.trees.l2_leaf},
        {"min_child_weight", bp.trees.min_child_weight}}},
      {"mlp",
       {{"hidden", bp.mlp.hidden},
        {"epochs", bp.mlp.epochs},
        {"learning_rate", bp.mlp.learning_rate},
        {"batch_size", bp.mlp.batch_size}}}};
  j["selectors"] = {
      {"kinds", names(c.selectors, [](const select::SelectorKind& k) { return k.name(); })},
      {"nuisance_base", to_string(c.nuisance_base)},
      {"radius",
       {{"k", c.radius.k},
        {"offset", c.radius.offset},
        {"clamp_nonnegative", c.radius.clamp_nonnegative},
        {"standardize", c.radius.standardize}}},
      {"solver",
       {{"mode", dro::to_string(c.solver.mode)},
        {"iterations", c.solver.iterations},
        {"lambda_init", c.solver.lambda_init},
        {"lambda_min", c.solver.lambda_min},
        {"lambda_max", c.solver.lambda_max},
        {"tol", c.solver.tol},
        {"grid_points", c.solver.grid_points}}}};
  j["eval"] = {{"replications", c.replications}, {"out", c.out.string()}};
  return j;
}

RunConfig from_json(const json& j) {
  RunConfig c;
  c.seed = j.at("seed").get<std::uint64_t>();
  c.jobs = j.at("jobs").get<std::size_t>();
  const auto& g = j.at("dgp");
  c.dgp.rho = g.at("rho").get<double>();
  c.dgp.xi = g.at("xi").get<double>();
  c.dgp.missing_ratio = g.at("missing_ratio").get<double>();
  c.dgp.coeff_p = g.at("coeff_p").get<double>();
  c.dgp.noise_sd = g.at("noise_sd").get<double>();
  c.dgp.treat_offset = g.at("treat_offset").get<double>();
  c.dgp.interaction_order = g.at("interaction_order").get<int>();
  c.dgp.n = g.at("n").get<std::size_t>();
  c.dgp.d = g.at("d").get<std::size_t>();
  const auto csv = g.at("covariate_csv").get<std::string>();
  if (!csv.empty()) c.dgp.covariate_csv = csv;
  const auto& s = j.at("split");
  c.split = {s.at("train").get<double>(), s.at("valid").get<double>(), s.at("test").get<double>()};

  c.learners.clear();
  for (const auto& l : j.at("pool").at("learners")) c.learners.push_back(learner_kind_from_string(l.get<std::string>()));
  c.bases.clear();
  for (const auto& b : j.at("pool").at("bases")) c.bases.push_back(base_kind_from_string(b.get<std::string>()));

  const auto& bp = j.at("base_params");
  auto& p = c.base_params;
  p.ridge.alpha = bp.at("ridge").at("alpha").get<double>();
  p.logistic.l2 = bp.at("logistic").at("l2").get<double>();
  p.logistic.max_iter = bp.at("logistic").at("max_iter").get<int>();
  p.knn.k = bp.at("knn").at("k").get<int>();
  const auto& bt = bp.at("boosted_trees");
  p.trees.rounds = bt.at("rounds").get<int>();
  p.trees.depth = bt.at("depth").get<int>();
  p.trees.learning_rate = bt.at("learning_rate").get<double>();
  p.trees.l2_leaf = bt.at("l2_leaf").get<double>();
  p.trees.min_child_weight = bt.at("min_child_weight").get<double>();
  const auto& mlp = bp.at("mlp");
  p.mlp.hidden = mlp.at("hidden").get<std::vector<int>>();
  p.mlp.epochs = mlp.at("epochs").get<int>();
  p.mlp.learning_rate = mlp.at("learning_rate").get<double>();
  p.mlp.batch_size = mlp.at("batch_size").get<int>();

  const auto& sel = j.at("selectors");
  c.selectors.clear();
  for (const auto& k : sel.at("kinds")) c.selectors.push_back(select::SelectorKind::parse(k.get<std::string>()));
  c.nuisance_base = base_kind_from_string(sel.at("nuisance_base").get<std::string>());
  const auto& r = sel.at("radius");
  c.radius.k = r.at("k").get<int>();
  c.radius.offset = r.at("offset").get<double>();
  c.radius.clamp_nonnegative = r.at("clamp_nonnegative").get<bool>();
  c.radius.standardize = r.at("standardize").get<bool>();
  const auto& sv = sel.at("solver");
  c.solver.mode = dro::solver_mode_from_string(sv.at("mode").get<std::string>());
  c.solver.iterations = sv.at("iterations").get<int>();
  c.solver.lambda_init = sv.at("lambda_init").get<double>();
  c.solver.lambda_min = sv.at("lambda_min").get<double>();
  c.solver.lambda_max = sv.at("lambda_max").get<double>();
  c.solver.tol = sv.at("tol").get<double>();
  c.solver.grid_points = sv.at("grid_points").get<int>();

  c.replications = j.at("eval").at("replications").get<std::size_t>();
  c.out = j.at("eval").at("out").get<std::string>();
  return c;
}

std::string type_name(const json& v) {
  if (v.is_number_unsigned()) return "unsigned integer";
  if (v.is_number_integer()) return "integer";
  return v.type_name();
}

bool compatible(const json& def, const json& v) {
  if (def.is_number_unsigned()) return v.is_number_unsigned();
  if (def.is_number_integer()) return v.is_number_integer();
  if (def.is_number_float()) return v.is_number();
  return def.type() == v.type();
}

// Checks `user` against the shape of `def`; arrays are checked on conversion.
void check_schema(const json& def, const json& user, const std::string& path) {
  if (!compatible(def, user))
    throw ValidationError("config key '" + path + "' expects " + type_name(def) + ", got " + type_name(user));
  if (!def.is_object()) return;
  for (const auto& [key, value] : user.items()) {
    const std::string sub = path.empty() ? key : path + "." + key;
    if (!def.contains(key)) throw ValidationError("unknown config key '" + sub + "'");
    check_schema(def.at(key), value, sub);
  }
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError("invalid JSON in " + what + ": " + e.what());
  }
}

void apply_override(json& doc, const json& defaults, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) throw ValidationError("override '" + spec + "' must look like key=value");
  const std::string key = spec.substr(0, eq);
  const std::string raw = spec.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  std::string pointer;
  for (std::size_t start = 0;;) {
    const auto dot = key.find('.', start);
    pointer += "/" + key.substr(start, dot - start);
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  const json::json_pointer ptr(pointer);
  if (!defaults.contains(ptr)) throw ValidationError("unknown config key '" + key + "'");
  check_schema(defaults.at(ptr), value, key);
  doc[ptr] = value;
}

}  // namespace

BaseModelSpec RunConfig::base_spec(BaseKind kind) const {
  BaseModelSpec s = base_params;
  s.kind = kind;
  return s;
}

std::vector<BaseModelSpec> RunConfig::base_specs() const {
  std::vector<BaseModelSpec> out;
  for (auto b : bases) out.push_back(base_spec(b));
  return out;
}

std::vector<CandidateId> RunConfig::candidate_ids() const {
  std::vector<CandidateId> ids;
  for (auto l : learners)
    for (auto b : bases) ids.push_back({l, b});
  return ids;
}

void RunConfig::validate() const {
  if (jobs < 1) throw ValidationError("jobs must be >= 1");
  dgp.validate();
  const double sum = split.train + split.valid + split.test;
  if (!(split.train > 0 && split.valid > 0 && split.test > 0) || std::abs(sum - 1.0) > 1e-9)
    throw ValidationError("split ratios must be positive and sum to 1");
  if (learners.empty()) throw ValidationError("pool.learners is empty");
  if (bases.empty()) throw ValidationError("pool.bases is empty");
  if (std::set<LearnerKind>(learners.begin(), learners.end()).size() != learners.size())
    throw ValidationError("duplicate learner in pool.learners");
  if (std::set<BaseKind>(bases.begin(), bases.end()).size() != bases.size())
    throw ValidationError("duplicate base in pool.bases");
  for (auto b : bases) {
    if (b == BaseKind::logistic) throw ValidationError("logistic cannot serve as a regression base");
    base_spec(b).validate();
  }
  if (nuisance_base == BaseKind::logistic) throw ValidationError("logistic cannot serve as the nuisance base");
  base_spec(nuisance_base).validate();
  for (std::size_t i = 0; i < selectors.size(); ++i)
    for (std::size_t j = i + 1; j < selectors.size(); ++j)
      if (selectors[i] == selectors[j]) throw ValidationError("duplicate selector " + selectors[i].name());
  radius.validate();
  solver.validate();
  if (replications < 1) throw ValidationError("eval.replications must be >= 1");
}

RunConfig parse_config(const std::string& json_text, const std::vector<std::string>& overrides) {
  const json defaults = to_json(RunConfig{});
  json doc = defaults;
  if (!json_text.empty()) {
    const json user = parse_json(json_text, "config");
    if (!user.is_object()) throw ValidationError("config must be a JSON object");
    check_schema(defaults, user, "");
    doc.merge_patch(user);
  }
  for (const auto& o : overrides) apply_override(doc, defaults, o);
  RunConfig cfg;
  try {
    cfg = from_json(doc);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::optional<std::filesystem::path>& path, const std::vector<std::string>& overrides) {
  if (!path) return parse_config("", overrides);
  if (!std::filesystem::exists(*path)) throw ValidationError("config file not found: " + path->string());
  return parse_config(io::read_text(*path), overrides);
}

std::string config_to_json(const RunConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

std::uint64_t config_hash(const RunConfig& cfg) {
  json j = to_json(cfg);
  j.erase("jobs");
  j["eval"].erase("out");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void apply_setting(RunConfig& cfg, char setting, std::optional<double> rho, std::optional<double> xi,
                   std::optional<double> m) {
  switch (setting) {
    case 'A':
    case 'B':
      cfg.dgp.rho = 0.1;
      cfg.dgp.xi = 1.0;
      cfg.dgp.missing_ratio = 0.0;
      break;
    case 'C':
      cfg.dgp.rho = 0.1;
      cfg.dgp.xi = 1.0;
      cfg.dgp.missing_ratio = 0.5;
      break;
    default: throw ValidationError(std::string("unknown setting '") + setting + "', expected A, B or C");
  }
  if (rho) cfg.dgp.rho = *rho;
  if (xi) cfg.dgp.xi = *xi;
  if (m) cfg.dgp.missing_ratio = *m;
  cfg.validate();
}

}  // namespace cateselect
