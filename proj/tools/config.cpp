#include "config.hpp"

#include <fstream>
#include <set>

#include "scusum/error.hpp"

namespace scusum::cli {

namespace {

using nlohmann::json;

// Reads the keys of one JSON object; finish() rejects whatever was not read.
class Section {
 public:
  Section(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) throw UsageError(where() + " must be an object");
  }

  template <typename T>
  void get(const std::string& key, T& field) {
    seen_.insert(key);
    if (!doc_.contains(key)) return;
    read(doc_.at(key), key, field);
  }

  template <typename Fn>
  void section(const std::string& key, Fn&& fill) {
    seen_.insert(key);
    if (!doc_.contains(key) || doc_.at(key).is_null()) return;
    Section sub(doc_.at(key), qualified(key));
    fill(sub);
    sub.finish();
  }

  void finish() const {
    for (const auto& [key, value] : doc_.items()) {
      if (!seen_.count(key)) throw UsageError("unknown config key '" + qualified(key) + "'");
    }
  }

  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string where() const { return path_.empty() ? "config" : "'" + path_ + "'"; }

  [[noreturn]] void type_error(const std::string& key, const char* want) const {
    throw UsageError("config key '" + qualified(key) + "' must be " + want);
  }

  void read(const json& v, const std::string& key, double& out) const {
    if (!v.is_number()) type_error(key, "a number");
    out = v.get<double>();
  }
  void read(const json& v, const std::string& key, std::uint64_t& out) const {
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
      type_error(key, "a non-negative integer");
    }
    out = v.get<std::uint64_t>();
  }
  void read(const json& v, const std::string& key, bool& out) const {
    if (!v.is_boolean()) type_error(key, "a boolean");
    out = v.get<bool>();
  }
  void read(const json& v, const std::string& key, std::string& out) const {
    if (!v.is_string()) type_error(key, "a string");
    out = v.get<std::string>();
  }
  template <typename T>
  void read(const json& v, const std::string& key, std::vector<T>& out) const {
    if (!v.is_array()) type_error(key, "an array");
    out.clear();
    for (const auto& item : v) {
      T value{};
      read(item, key, value);
      out.push_back(value);
    }
  }
  template <typename T>
  void read(const json& v, const std::string& key, std::optional<T>& out) const {
    if (v.is_null()) {
      out.reset();
      return;
    }
    T value{};
    read(v, key, value);
    out = value;
  }

  const json& doc_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_kernel(Section& s, GaussianKernelSpec& k) {
  s.get("dim", k.dim);
  s.get("alpha", k.alpha);
  s.get("sigma", k.sigma);
  s.get("shift", k.shift);
}

json kernel_json(const GaussianKernelSpec& k) {
  return {{"dim", k.dim}, {"alpha", k.alpha}, {"sigma", k.sigma}, {"shift", k.shift}};
}

template <typename T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

void read_doeblin(Section& parent, std::optional<DoeblinSection>& out) {
  parent.section("doeblin", [&](Section& s) {
    DoeblinSection d;
    s.get("l", d.l);
    s.get("lambda", d.lambda);
    out = d;
  });
}

json doeblin_json(const std::optional<DoeblinSection>& d) {
  if (!d) return nullptr;
  return {{"l", d->l}, {"lambda", d->lambda}};
}

}  // namespace

ExperimentConfig config_from_json(const json& doc) {
  ExperimentConfig c;
  Section root(doc, "");
  root.get("seed", c.seed);
  root.get("out_dir", c.out_dir);
  root.section("pre_kernel", [&](Section& s) { read_kernel(s, c.pre_kernel); });
  root.section("post_kernel", [&](Section& s) { read_kernel(s, c.post_kernel); });
  root.section("trajectory", [&](Section& s) {
    s.get("length", c.trajectory.length);
    s.get("change_point", c.trajectory.change_point);
    s.get("burn_in", c.trajectory.burn_in);
  });
  root.section("training", [&](Section& s) {
    auto& t = c.training;
    s.get("dataset", t.dataset);
    s.get("segment", t.segment);
    s.get("kernel", t.kernel);
    s.get("pairs", t.pairs);
    s.get("eval_pairs", t.eval_pairs);
    s.get("hidden_widths", t.hidden_widths);
    s.get("model_file", t.model_file);
    s.get("learning_rate", t.optimizer.learning_rate);
    s.get("batch_size", t.optimizer.batch_size);
    s.get("epochs", t.optimizer.epochs);
    s.get("beta1", t.optimizer.beta1);
    s.get("beta2", t.optimizer.beta2);
    s.get("epsilon", t.optimizer.epsilon);
    s.get("shuffle", t.optimizer.shuffle);
    s.get("standardize", t.optimizer.standardize);
    std::string name = t.optimizer.optimizer == Optimizer::Adam ? "adam" : "sgd";
    s.get("optimizer", name);
    if (name == "adam") {
      t.optimizer.optimizer = Optimizer::Adam;
    } else if (name == "sgd") {
      t.optimizer.optimizer = Optimizer::SGD;
    } else {
      throw UsageError("training.optimizer must be \"adam\" or \"sgd\"");
    }
    if (t.segment != "all" && t.segment != "pre" && t.segment != "post") {
      throw UsageError("training.segment must be \"all\", \"pre\" or \"post\"");
    }
    if (t.kernel != "pre" && t.kernel != "post") throw UsageError("training.kernel must be \"pre\" or \"post\"");
  });
  root.section("models", [&](Section& s) {
    s.get("pre", c.models.pre);
    s.get("post", c.models.post);
  });
  root.section("detector", [&](Section& s) {
    s.get("threshold", c.detector.threshold);
    s.get("truncation", c.detector.truncation);
    s.get("data", c.detector.data);
  });
  root.section("sweep", [&](Section& s) {
    auto& w = c.sweep;
    s.get("thresholds", w.thresholds);
    s.get("false_alarm_length", w.false_alarm_length);
    s.get("delay_length", w.delay_length);
    s.get("truncation", w.truncation);
    s.get("delta", w.delta);
    s.get("I", w.I);
    s.get("mu", w.mu);
    s.get("mu_factor", w.mu_factor);
    read_doeblin(s, w.doeblin);
  });
  root.section("bounds", [&](Section& s) {
    auto& b = c.bounds;
    s.get("delta", b.delta);
    s.get("mu", b.mu);
    s.get("b", b.b);
    s.get("I", b.I);
    s.get("M", b.M);
    s.get("mu_factor", b.mu_factor);
    read_doeblin(s, b.doeblin);
  });
  root.section("scenario", [&](Section& s) {
    auto& m = c.scenario;
    s.get("pre_clip", m.pre_clip);
    s.get("post_clip", m.post_clip);
    s.get("splice_index", m.splice_index);
    s.get("stride", m.stride);
    s.get("standardize", m.standardize);
    s.get("post_length", m.post_length);
  });
  root.finish();
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  const auto& t = c.training;
  return {
      {"seed", c.seed},
      {"out_dir", c.out_dir},
      {"pre_kernel", kernel_json(c.pre_kernel)},
      {"post_kernel", kernel_json(c.post_kernel)},
      {"trajectory",
       {{"length", c.trajectory.length},
        {"change_point", opt(c.trajectory.change_point)},
        {"burn_in", c.trajectory.burn_in}}},
      {"training",
       {{"dataset", opt(t.dataset)},
        {"segment", t.segment},
        {"kernel", t.kernel},
        {"pairs", t.pairs},
        {"eval_pairs", t.eval_pairs},
        {"hidden_widths", t.hidden_widths},
        {"model_file", t.model_file},
        {"optimizer", t.optimizer.optimizer == Optimizer::Adam ? "adam" : "sgd"},
        {"learning_rate", t.optimizer.learning_rate},
        {"batch_size", t.optimizer.batch_size},
        {"epochs", t.optimizer.epochs},
        {"beta1", t.optimizer.beta1},
        {"beta2", t.optimizer.beta2},
        {"epsilon", t.optimizer.epsilon},
        {"shuffle", t.optimizer.shuffle},
        {"standardize", t.optimizer.standardize}}},
      {"models", {{"pre", c.models.pre}, {"post", c.models.post}}},
      {"detector",
       {{"threshold", c.detector.threshold},
        {"truncation", opt(c.detector.truncation)},
        {"data", opt(c.detector.data)}}},
      {"sweep",
       {{"thresholds", c.sweep.thresholds},
        {"false_alarm_length", c.sweep.false_alarm_length},
        {"delay_length", c.sweep.delay_length},
        {"truncation", c.sweep.truncation},
        {"delta", opt(c.sweep.delta)},
        {"I", opt(c.sweep.I)},
        {"mu", opt(c.sweep.mu)},
        {"mu_factor", c.sweep.mu_factor},
        {"doeblin", doeblin_json(c.sweep.doeblin)}}},
      {"bounds",
       {{"delta", opt(c.bounds.delta)},
        {"mu", opt(c.bounds.mu)},
        {"b", opt(c.bounds.b)},
        {"I", opt(c.bounds.I)},
        {"M", opt(c.bounds.M)},
        {"mu_factor", c.bounds.mu_factor},
        {"doeblin", doeblin_json(c.bounds.doeblin)}}},
      {"scenario",
       {{"pre_clip", opt(c.scenario.pre_clip)},
        {"post_clip", opt(c.scenario.post_clip)},
        {"splice_index", opt(c.scenario.splice_index)},
        {"stride", c.scenario.stride},
        {"standardize", c.scenario.standardize},
        {"post_length", opt(c.scenario.post_length)}}},
  };
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(e.what(), 0, path);
  }
  return config_from_json(doc);
}

}  // namespace scusum::cli
