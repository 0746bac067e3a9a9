#include "tmle/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "tmle/error.hpp"
#include "tmle/numeric.hpp"
#include "tmle/rng.hpp"

namespace tmle::harness {

namespace {

// A value literal: number, true/false, bare word, quoted string, [list] or
// name(args).
struct Value {
  enum class Kind { number, boolean, word, string, list, call };
  Kind kind = Kind::number;
  double number = 0.0;
  bool boolean = false;
  std::string text;
  std::vector<Value> items;

  std::string render() const {
    switch (kind) {
      case Kind::number:
        return format_double(number);
      case Kind::boolean:
        return boolean ? "true" : "false";
      case Kind::word:
        return text;
      case Kind::string:
        return '"' + text + '"';
      case Kind::list:
      case Kind::call: {
        std::string out = kind == Kind::call ? text + "(" : "[";
        for (std::size_t i = 0; i < items.size(); ++i) out += (i ? ", " : "") + items[i].render();
        return out + (kind == Kind::call ? ")" : "]");
      }
    }
    return {};
  }
};

class ValueParser {
 public:
  ValueParser(std::string_view text, std::size_t line) : text_(text), line_(line) {}

  Value parse() {
    Value v = value();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected trailing text");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("line " + std::to_string(line_) + ": " + what);
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  std::vector<Value> sequence(char close) {
    std::vector<Value> items;
    if (accept(close)) return items;
    do {
      items.push_back(value());
    } while (accept(','));
    expect(close);
    return items;
  }

  Value value() {
    skip_space();
    if (pos_ == text_.size()) fail("missing value");
    const char c = text_[pos_];
    Value v;
    if (c == '[') {
      ++pos_;
      v.kind = Value::Kind::list;
      v.items = sequence(']');
      return v;
    }
    if (c == '"') {
      const auto end = text_.find('"', pos_ + 1);
      if (end == std::string_view::npos) fail("unterminated string");
      v.kind = Value::Kind::string;
      v.text = std::string(text_.substr(pos_ + 1, end - pos_ - 1));
      pos_ = end + 1;
      return v;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
        ++pos_;
      }
      v.text = std::string(text_.substr(start, pos_ - start));
      if (accept('(')) {
        v.kind = Value::Kind::call;
        v.items = sequence(')');
      } else if (v.text == "true" || v.text == "false") {
        v.kind = Value::Kind::boolean;
        v.boolean = v.text == "true";
      } else {
        v.kind = Value::Kind::word;
      }
      return v;
    }
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.' ||
                                   text_[pos_] == '-' || text_[pos_] == '+')) {
      ++pos_;
    }
    std::string_view token = text_.substr(start, pos_ - start);
    if (!token.empty() && token.front() == '+') token.remove_prefix(1);
    const auto number = parse_double(token);
    if (!number || !std::isfinite(*number)) fail("bad number '" + std::string(text_.substr(start, pos_ - start)) + "'");
    v.kind = Value::Kind::number;
    v.number = *number;
    return v;
  }

  std::string_view text_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

struct Entry {
  Value value;
  std::size_t line = 0;
  bool used = false;
};

class Document {
 public:
  explicit Document(std::string_view text) {
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
      const auto end = std::min(text.find('\n', start), text.size());
      std::string_view line = text.substr(start, end - start);
      start = end + 1;
      ++line_no;
      line = strip_comment(line);
      line = trim(line);
      if (line.empty()) {
        if (end == text.size()) break;
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
      const std::string key(trim(line.substr(0, eq)));
      if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
      for (char c : key) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.')) {
          throw ConfigError("line " + std::to_string(line_no) + ": invalid key '" + key + "'");
        }
      }
      Entry entry{ValueParser(trim(line.substr(eq + 1)), line_no).parse(), line_no, false};
      if (!entries_.emplace(key, std::move(entry)).second) {
        throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
      }
      if (end == text.size()) break;
    }
  }

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  const Value* find(const std::string& key) {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return nullptr;
    it->second.used = true;
    return &it->second.value;
  }

  const Value& require(const std::string& key) {
    const Value* v = find(key);
    if (!v) throw ConfigError("missing required key '" + key + "'");
    return *v;
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    const auto it = entries_.find(key);
    const std::string where = it == entries_.end() ? "" : "line " + std::to_string(it->second.line) + ": ";
    throw ConfigError(where + key + ": " + what);
  }

  double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
    const Value* v = find(key);
    if (!v) {
      if (fallback) return *fallback;
      throw ConfigError("missing required key '" + key + "'");
    }
    if (v->kind != Value::Kind::number) fail(key, "expected a number");
    return v->number;
  }

  std::size_t count(const std::string& key, std::optional<std::size_t> fallback = std::nullopt) {
    const Value* v = find(key);
    if (!v) {
      if (fallback) return *fallback;
      throw ConfigError("missing required key '" + key + "'");
    }
    return to_count(key, *v);
  }

  std::uint64_t seed(const std::string& key) {
    const Value& v = require(key);
    if (v.kind != Value::Kind::number || v.number < 0 || v.number != std::floor(v.number) || v.number > 9.0e15) {
      fail(key, "expected a non-negative integer below 9e15");
    }
    return static_cast<std::uint64_t>(v.number);
  }

  bool boolean(const std::string& key, bool fallback) {
    const Value* v = find(key);
    if (!v) return fallback;
    if (v->kind != Value::Kind::boolean) fail(key, "expected true or false");
    return v->boolean;
  }

  std::string word(const std::string& key, std::optional<std::string> fallback = std::nullopt) {
    const Value* v = find(key);
    if (!v) {
      if (fallback) return *fallback;
      throw ConfigError("missing required key '" + key + "'");
    }
    if (v->kind != Value::Kind::word && v->kind != Value::Kind::string) fail(key, "expected a name");
    return v->text;
  }

  std::vector<double> numbers(const std::string& key, std::optional<std::vector<double>> fallback = std::nullopt) {
    const Value* v = find(key);
    if (!v) {
      if (fallback) return *fallback;
      throw ConfigError("missing required key '" + key + "'");
    }
    return to_numbers(key, *v);
  }

  std::vector<std::size_t> counts(const std::string& key, std::vector<std::size_t> fallback) {
    const Value* v = find(key);
    if (!v) return fallback;
    if (v->kind != Value::Kind::list) fail(key, "expected a list");
    std::vector<std::size_t> out;
    for (const auto& item : v->items) out.push_back(to_count(key, item));
    return out;
  }

  std::vector<std::vector<double>> matrix(const std::string& key) {
    const Value& v = require(key);
    if (v.kind != Value::Kind::list) fail(key, "expected a list of rows");
    std::vector<std::vector<double>> rows;
    for (const auto& row : v.items) rows.push_back(to_numbers(key, row));
    return rows;
  }

  std::vector<FeatureLaw> laws(const std::string& key) {
    const Value& v = require(key);
    if (v.kind != Value::Kind::list) fail(key, "expected a list of feature laws");
    std::vector<FeatureLaw> out;
    for (const auto& item : v.items) {
      if (item.kind != Value::Kind::call) fail(key, "feature laws are written name(args)");
      std::vector<double> args;
      for (const auto& a : item.items) {
        if (a.kind != Value::Kind::number) fail(key, "feature law arguments must be numbers");
        args.push_back(a.number);
      }
      if (item.text == "normal" && args.size() == 2) {
        out.push_back(NormalLaw{args[0], args[1]});
      } else if (item.text == "uniform" && args.size() == 2) {
        out.push_back(UniformLaw{args[0], args[1]});
      } else if (item.text == "categorical" && !args.empty()) {
        out.push_back(CategoricalLaw{args});
      } else {
        fail(key, "unknown feature law '" + item.render() + "'");
      }
    }
    return out;
  }

  void reject_unused() const {
    for (const auto& [key, entry] : entries_) {
      if (!entry.used) throw ConfigError("line " + std::to_string(entry.line) + ": unknown key '" + key + "'");
    }
  }

  std::string canonical() const {
    std::string out;
    for (const auto& [key, entry] : entries_) {
      if (key == "seed" || key == "replicates" || key == "threads") continue;
      out += key + " = " + entry.value.render() + "\n";
    }
    return out;
  }

 private:
  static std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
  }

  static std::string_view strip_comment(std::string_view s) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '"') quoted = !quoted;
      if (s[i] == '#' && !quoted) return s.substr(0, i);
    }
    return s;
  }

  std::size_t to_count(const std::string& key, const Value& v) const {
    if (v.kind != Value::Kind::number || v.number < 0 || v.number != std::floor(v.number) || v.number > 1e15) {
      fail(key, "expected a non-negative integer");
    }
    return static_cast<std::size_t>(v.number);
  }

  std::vector<double> to_numbers(const std::string& key, const Value& v) const {
    if (v.kind != Value::Kind::list) fail(key, "expected a list of numbers");
    std::vector<double> out;
    for (const auto& item : v.items) {
      if (item.kind != Value::Kind::number) fail(key, "expected a list of numbers");
      out.push_back(item.number);
    }
    return out;
  }

  std::map<std::string, Entry> entries_;
};

Design parse_design(Document& doc, const std::string& prefix, std::size_t population_size) {
  const std::string kind = doc.word(prefix + ".kind", std::string("srswor"));
  if (kind == "srswor") return Srswor{doc.count(prefix + ".size", population_size)};
  if (kind == "srswr") return Srswr{doc.count(prefix + ".size")};
  if (kind == "poisson") {
    PoissonDesign d;
    d.expected_size = doc.number(prefix + ".size");
    if (doc.has(prefix + ".size_feature")) d.size_feature = doc.count(prefix + ".size_feature");
    return d;
  }
  if (kind == "stratified") {
    Stratified d;
    d.feature = doc.count(prefix + ".stratum_feature");
    d.cuts = doc.numbers(prefix + ".cuts");
    d.sizes = doc.counts(prefix + ".sizes", {});
    if (d.sizes.size() != d.cuts.size() + 1) {
      throw ConfigError(prefix + ": stratified design needs one size per stratum (cuts + 1)");
    }
    return d;
  }
  throw ConfigError(prefix + ".kind: unknown design '" + kind + "'");
}

double probability_in(Document& doc, const std::string& key, double fallback, bool allow_zero, bool allow_one) {
  const double p = doc.number(key, fallback);
  const bool ok = (allow_zero ? p >= 0.0 : p > 0.0) && (allow_one ? p <= 1.0 : p < 1.0);
  if (!ok) doc.fail(key, "probability out of range");
  return p;
}

}  // namespace

std::string to_string(ErrorSource source) {
  switch (source) {
    case ErrorSource::feature_noise:
      return "feature_noise";
    case ErrorSource::label_error:
      return "label_error";
    case ErrorSource::frame_coverage:
      return "frame_coverage";
    case ErrorSource::sampling:
      return "sampling";
    case ErrorSource::model_assumption:
      return "model_assumption";
    case ErrorSource::drift:
      return "drift";
    case ErrorSource::nonresponse:
      return "nonresponse";
  }
  return "?";
}

std::string to_string(EstimatorMode mode) { return mode == EstimatorMode::fixed_model ? "fixed_model" : "assisting"; }

bool Toggles::none() const {
  for (bool b : on_) {
    if (b) return false;
  }
  return true;
}

std::string Toggles::label() const {
  std::string out;
  for (auto s : kErrorSources) {
    if ((*this)[s]) out += (out.empty() ? "" : "+") + to_string(s);
  }
  return out.empty() ? "none" : out;
}

void ScenarioConfig::validate() const {
  population.validate();
  if (replicates < 1) throw ConfigError("replicates must be at least 1");
  if (target_population_size < 1 || training_population_size < 1) {
    throw ConfigError("population sizes must be positive");
  }
  if (split.kind == SplitKind::holdout && !(split.holdout > 0.0 && split.holdout < 1.0)) {
    throw ConfigError("training.split.holdout must lie in (0, 1)");
  }
  if (split.kind == SplitKind::kfold && split.folds < 2) throw ConfigError("training.split.folds must be at least 2");
  if (!(frame.undercoverage >= 0.0 && frame.undercoverage < 1.0)) throw ConfigError("frame.undercoverage must lie in [0, 1)");
  if (!(frame.overcoverage >= 0.0 && frame.overcoverage < 1.0)) throw ConfigError("frame.overcoverage must lie in [0, 1)");
  if (!(nonresponse.base > 0.0 && nonresponse.base <= 1.0)) throw ConfigError("nonresponse.base must lie in (0, 1]");
  if (!(drift_magnitude >= 0.0)) throw ConfigError("drift.magnitude must be >= 0");
  if (drift_magnitude > 0.0 && population.drift.kind == DriftKind::none) {
    throw ConfigError("drift.magnitude is set but drift.kind is none");
  }
  feature_noise.validate();
  if (feature_noise.input_dim() != population.dim()) {
    throw ConfigError("measurement.feature_sd needs one entry per feature");
  }
  if (feature_noise.output_dim() == 0) throw ConfigError("measurement.omit drops every feature");
  if (confusion) {
    if (population.task != Task::classification) throw ConfigError("measurement.confusion needs a classification task");
    if (confusion->classes() != population.classes) {
      throw ConfigError("measurement.confusion must be classes x classes");
    }
  }
  if (!(target_sd >= 0.0)) throw ConfigError("measurement.target_sd must be >= 0");
  tree.validate();
  if (population.task == Task::classification && population.classes != 2) {
    throw ConfigError("the tree model supports two classes only");
  }
  if (calibration.enabled) {
    if (population.task != Task::classification) throw ConfigError("calibration needs a classification task");
    if (!(calibration.target_prevalence > 0.0 && calibration.target_prevalence < 1.0)) {
      throw ConfigError("calibration.target_prevalence must lie in (0, 1)");
    }
    if (!(calibration.training_positive_share > 0.0 && calibration.training_positive_share < 1.0)) {
      throw ConfigError("calibration.training_positive_share must lie in (0, 1)");
    }
    if (calibration.training_size < 2) throw ConfigError("calibration.training_size must be at least 2");
    if (calibration.ensemble_size < 1) throw ConfigError("calibration.ensemble_size must be at least 1");
    if (!(calibration.threshold >= 0.0 && calibration.threshold <= 1.0)) {
      throw ConfigError("calibration.threshold must lie in [0, 1]");
    }
  }
  if (enrichment.enabled && population.task != Task::classification) {
    throw ConfigError("enrichment needs a classification task");
  }
  if (representativity_cuts && representativity_cuts->cuts.size() != population.dim()) {
    throw ConfigError("representativity.cuts needs one list per feature");
  }
}

SuperPopulationSpec ScenarioConfig::target_population(bool drift_on) const {
  SuperPopulationSpec spec = drift_on ? apply_drift(population, drift_magnitude) : population;
  spec.name = "target";
  return spec;
}

ScenarioConfig parse_scenario(std::string_view text) {
  Document doc(text);
  ScenarioConfig cfg;

  const double version = doc.number("schema_version");
  if (version != kSchemaVersion) {
    throw ConfigError("unsupported schema_version " + format_double(version) + " (expected " +
                      std::to_string(kSchemaVersion) + ")");
  }
  cfg.seed = doc.seed("seed");
  cfg.replicates = doc.count("replicates", 200);
  cfg.threads = doc.count("threads", 0);

  auto& spec = cfg.population;
  spec.name = "training";
  const std::string task = doc.word("task");
  if (task == "regression") {
    spec.task = Task::regression;
  } else if (task == "classification") {
    spec.task = Task::classification;
    spec.classes = doc.count("classes", 2);
  } else {
    doc.fail("task", "expected regression or classification");
  }
  spec.features = doc.laws("population.features");
  const std::string dependence = doc.word("population.dependence", std::string("linear"));
  const auto kind = parse_dependence_kind(dependence);
  if (!kind) doc.fail("population.dependence", "unknown dependence '" + dependence + "'");
  spec.dependence.kind = *kind;
  spec.dependence.intercept = doc.number("population.intercept", 0.0);
  spec.dependence.coefficients = doc.numbers("population.coefficients");
  if (spec.dependence.kind == DependenceKind::piecewise_constant) spec.dependence.cuts = doc.numbers("population.cuts");
  spec.noise_sd = doc.number("population.noise_sd", 0.0);
  cfg.target_population_size = doc.count("population.size");
  cfg.training_population_size = doc.count("training.population_size", cfg.target_population_size);

  const std::string drift = doc.word("drift.kind", std::string("none"));
  const auto drift_kind = parse_drift_kind(drift);
  if (!drift_kind) doc.fail("drift.kind", "unknown drift operator '" + drift + "'");
  spec.drift.kind = *drift_kind;
  spec.drift.feature = doc.count("drift.feature", 0);
  const auto plane = doc.counts("drift.plane", {0, 1});
  if (plane.size() != 2) doc.fail("drift.plane", "expected two coefficient indices");
  spec.drift.plane = {plane[0], plane[1]};
  cfg.drift_magnitude = doc.number("drift.magnitude", 0.0);

  if (spec.task == Task::classification) {
    // Validate everything but the thresholds before the (costly) solve.
    SuperPopulationSpec probe = spec;
    probe.task = Task::regression;
    probe.classes = 0;
    probe.validate();
    spec = with_prevalence(spec, doc.numbers("population.prevalence"));
  }

  cfg.frame.undercoverage = probability_in(doc, "frame.undercoverage", 0.0, true, false);
  cfg.frame.undercoverage_tilt = doc.number("frame.undercoverage_tilt", 0.0);
  cfg.frame.overcoverage = probability_in(doc, "frame.overcoverage", 0.0, true, false);
  const std::string apply_to = doc.word("frame.apply_to", std::string("both"));
  if (apply_to != "both" && apply_to != "training" && apply_to != "target") {
    doc.fail("frame.apply_to", "expected both, training or target");
  }
  cfg.frame.training = apply_to != "target";
  cfg.frame.target = apply_to != "training";

  cfg.training_design = parse_design(doc, "training.design", cfg.training_population_size);
  const std::string split = doc.word("training.split.kind", std::string("holdout"));
  if (split == "holdout") {
    cfg.split.kind = SplitKind::holdout;
  } else if (split == "kfold") {
    cfg.split.kind = SplitKind::kfold;
  } else {
    doc.fail("training.split.kind", "expected holdout or kfold");
  }
  cfg.split.holdout = doc.number("training.split.holdout", 0.25);
  cfg.split.folds = doc.count("training.split.folds", 5);
  cfg.target_design = parse_design(doc, "target.design", cfg.target_population_size);

  const std::size_t dim = spec.dim();
  cfg.feature_noise.sd = doc.numbers("measurement.feature_sd", std::vector<double>(dim, 0.0));
  cfg.feature_noise.omit.assign(cfg.feature_noise.sd.size(), false);
  for (std::size_t j : doc.counts("measurement.omit", {})) {
    if (j >= cfg.feature_noise.omit.size()) doc.fail("measurement.omit", "feature index out of range");
    cfg.feature_noise.omit[j] = true;
  }
  cfg.target_sd = doc.number("measurement.target_sd", 0.0);
  if (doc.has("measurement.confusion")) {
    const auto rows = doc.matrix("measurement.confusion");
    std::vector<double> flat;
    for (const auto& row : rows) {
      if (row.size() != rows.size()) doc.fail("measurement.confusion", "matrix must be square");
      flat.insert(flat.end(), row.begin(), row.end());
    }
    try {
      cfg.confusion = TransformationMatrix(rows.size(), std::move(flat));
    } catch (const MatrixError& e) {
      doc.fail("measurement.confusion", e.what());
    }
  }

  cfg.nonresponse.base = probability_in(doc, "nonresponse.base", 1.0, false, true);
  cfg.nonresponse.tilt = doc.number("nonresponse.tilt", 0.0);

  cfg.tree.max_depth = doc.count("tree.max_depth", 4);
  cfg.tree.min_leaf = doc.count("tree.min_leaf", 5);
  cfg.tree.min_split_improvement = doc.number("tree.min_split_improvement", 0.0);

  const std::string mode = doc.word("estimator.mode", std::string("fixed_model"));
  if (mode == "fixed_model") {
    cfg.mode = EstimatorMode::fixed_model;
  } else if (mode == "assisting") {
    cfg.mode = EstimatorMode::assisting;
  } else {
    doc.fail("estimator.mode", "expected fixed_model or assisting");
  }

  cfg.calibration.enabled = doc.boolean("calibration.enabled", false);
  const double default_prevalence = spec.task == Task::classification ? spec.prevalence[1] : 0.0;
  cfg.calibration.target_prevalence = doc.number("calibration.target_prevalence", default_prevalence);
  cfg.calibration.training_positive_share = doc.number("calibration.training_positive_share", 0.5);
  cfg.calibration.training_size = doc.count("calibration.training_size", 1000);
  cfg.calibration.ensemble_size = doc.count("calibration.ensemble_size", 10);
  cfg.calibration.threshold = doc.number("calibration.threshold", 0.5);

  cfg.enrichment.enabled = doc.boolean("enrichment.enabled", false);
  cfg.enrichment.initial_positives = doc.count("enrichment.initial_positives", 110);
  cfg.enrichment.initial_negatives = doc.count("enrichment.initial_negatives", 330);
  cfg.enrichment.batch = doc.count("enrichment.batch", 370);
  cfg.enrichment.iterations = doc.count("enrichment.iterations", 1);

  if (doc.has("representativity.cuts")) {
    Binning b;
    b.cuts = doc.matrix("representativity.cuts");
    for (const auto& c : b.cuts) {
      if (!std::is_sorted(c.begin(), c.end())) doc.fail("representativity.cuts", "cut points must be ascending");
    }
    cfg.representativity_cuts = std::move(b);
  }

  for (auto s : kErrorSources) cfg.toggles.set(s, doc.boolean("toggles." + to_string(s), false));

  doc.reject_unused();
  cfg.canonical = doc.canonical();
  cfg.validate();
  return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read scenario file '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_scenario(text.str());
}

std::uint64_t config_hash(const ScenarioConfig& config) {
  const std::string text =
      config.canonical + "seed = " + std::to_string(config.seed) + "\nreplicates = " + std::to_string(config.replicates) + "\n";
  return rng::tag(text);
}

}  // namespace tmle::harness
