#include "fedsim/config.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "fedsim/rng.h"

namespace fedsim {

using nlohmann::json;

namespace {

constexpr std::uint64_t kMasterTag = 0x6d6173746572;  // "master"
constexpr std::uint64_t kTestTag = 0x74657374;        // "test"
constexpr std::uint64_t kPartitionTag = 0x70617274;   // "part"
constexpr std::uint64_t kJoinTag = 0x6a6f696e;        // "join"
constexpr std::int64_t kTestIdBase = 1'000'000'000;

std::size_t LineOfOffset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(
                 std::count(text.begin(), text.begin() + offset, '\n'));
}

// Walks a parsed document, rejecting unknown keys and wrong types. Locations
// are reported as a dotted path plus the line of the key's first appearance
// in the source text.
class Reader {
 public:
  explicit Reader(const std::string& text) : text_(text) {}

  std::string Where(const std::string& path) const {
    const auto dot = path.find_last_of('.');
    std::string key = dot == std::string::npos ? path : path.substr(dot + 1);
    if (const auto br = key.find('['); br != std::string::npos) {
      key = key.substr(0, br);
    }
    const auto pos = text_.find("\"" + key + "\"");
    if (pos == std::string::npos) return fmt::format("'{}'", path);
    return fmt::format("'{}' (line {})", path, LineOfOffset(text_, pos));
  }

  [[noreturn]] void Fail(const std::string& path, const std::string& msg) const {
    throw ConfigError(ConfigError::Kind::kParse,
                      fmt::format("config key {}: {}", Where(path), msg));
  }

  [[noreturn]] void Invalid(const std::string& path,
                            const std::string& msg) const {
    throw ConfigError(ConfigError::Kind::kValidation,
                      fmt::format("config key {}: {}", Where(path), msg));
  }

  void CheckKeys(const json& obj, const std::string& path,
                 std::initializer_list<std::string_view> allowed) const {
    if (!obj.is_object()) Fail(path, "expected an object");
    for (const auto& [key, value] : obj.items()) {
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
        Fail(Join(path, key), "unknown key");
      }
    }
  }

  static std::string Join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

  const json* Find(const json& obj, const std::string& key) const {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
  }

  const json& Require(const json& obj, const std::string& path,
                      const std::string& key) const {
    const json* v = Find(obj, key);
    if (!v) Fail(Join(path, key), "missing required key");
    return *v;
  }

  std::int64_t Int(const json& v, const std::string& path) const {
    if (!v.is_number_integer()) Fail(path, "expected an integer");
    return v.get<std::int64_t>();
  }

  std::uint64_t U64(const json& v, const std::string& path) const {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
      return static_cast<std::uint64_t>(v.get<std::int64_t>());
    }
    Fail(path, "expected a non-negative integer");
  }

  std::size_t Count(const json& v, const std::string& path) const {
    return static_cast<std::size_t>(U64(v, path));
  }

  double Real(const json& v, const std::string& path) const {
    if (!v.is_number()) Fail(path, "expected a number");
    return v.get<double>();
  }

  bool Bool(const json& v, const std::string& path) const {
    if (!v.is_boolean()) Fail(path, "expected true or false");
    return v.get<bool>();
  }

  std::string String(const json& v, const std::string& path) const {
    if (!v.is_string()) Fail(path, "expected a string");
    return v.get<std::string>();
  }

  const json& Array(const json& v, const std::string& path) const {
    if (!v.is_array()) Fail(path, "expected an array");
    return v;
  }

  std::vector<double> Reals(const json& v, const std::string& path) const {
    std::vector<double> out;
    for (std::size_t i = 0; i < Array(v, path).size(); ++i) {
      out.push_back(Real(v[i], fmt::format("{}[{}]", path, i)));
    }
    return out;
  }

  std::vector<std::size_t> Counts(const json& v, const std::string& path) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < Array(v, path).size(); ++i) {
      out.push_back(Count(v[i], fmt::format("{}[{}]", path, i)));
    }
    return out;
  }

  std::array<std::size_t, 2> Pair(const json& v, const std::string& path) const {
    const auto c = Counts(v, path);
    if (c.size() != 2) Fail(path, "expected [negatives, positives]");
    return {c[0], c[1]};
  }

  // Runs `parse` and converts InvalidArgument into a parse error at `path`.
  template <typename F>
  auto Enum(const std::string& path, F parse) const {
    try {
      return parse();
    } catch (const InvalidArgument& e) {
      Fail(path, e.what());
    }
  }

 private:
  const std::string& text_;
};

ModelSpec ReadModel(const Reader& rd, const json& j) {
  const std::string p = "model";
  rd.CheckKeys(j, p, {"kind", "input_dim", "hidden_dim", "activation"});
  ModelSpec m;
  const std::string kind = rd.String(rd.Require(j, p, "kind"), p + ".kind");
  m.kind = rd.Enum(p + ".kind", [&] { return ParseModelKind(kind); });
  m.input_dim = rd.Count(rd.Require(j, p, "input_dim"), p + ".input_dim");
  if (const json* v = rd.Find(j, "hidden_dim")) {
    m.hidden_dim = rd.Count(*v, p + ".hidden_dim");
  } else if (m.kind == ModelKind::kMlp1Hidden) {
    rd.Fail(p + ".hidden_dim", "missing required key");
  }
  if (const json* v = rd.Find(j, "activation")) {
    const std::string act = rd.String(*v, p + ".activation");
    m.activation = rd.Enum(p + ".activation", [&] { return ParseActivation(act); });
  }
  if (m.input_dim == 0) rd.Invalid(p + ".input_dim", "must be positive");
  if (m.kind == ModelKind::kMlp1Hidden && m.hidden_dim == 0) {
    rd.Invalid(p + ".hidden_dim", "must be positive");
  }
  return m;
}

std::variant<SyntheticData, CsvData> ReadData(const Reader& rd, const json& j) {
  const std::string p = "data";
  rd.CheckKeys(j, p, {"synthetic", "csv"});
  const json* syn = rd.Find(j, "synthetic");
  const json* csv = rd.Find(j, "csv");
  if ((syn != nullptr) == (csv != nullptr)) {
    rd.Fail(p, "exactly one of 'synthetic' or 'csv' is required");
  }
  if (csv) {
    const std::string q = p + ".csv";
    rd.CheckKeys(*csv, q, {"master", "test"});
    return CsvData{rd.String(rd.Require(*csv, q, "master"), q + ".master"),
                   rd.String(rd.Require(*csv, q, "test"), q + ".test")};
  }
  const std::string q = p + ".synthetic";
  rd.CheckKeys(*syn, q, {"class_means", "scale", "per_class", "test_per_class"});
  SyntheticData s;
  const json& means = rd.Array(rd.Require(*syn, q, "class_means"), q + ".class_means");
  if (means.size() != 2) rd.Fail(q + ".class_means", "expected two mean vectors");
  s.class_means[0] = rd.Reals(means[0], q + ".class_means[0]");
  s.class_means[1] = rd.Reals(means[1], q + ".class_means[1]");
  if (const json* v = rd.Find(*syn, "scale")) s.scale = rd.Real(*v, q + ".scale");
  s.per_class = rd.Pair(rd.Require(*syn, q, "per_class"), q + ".per_class");
  s.test_per_class =
      rd.Pair(rd.Require(*syn, q, "test_per_class"), q + ".test_per_class");
  if (s.class_means[0].empty() || s.class_means[0].size() != s.class_means[1].size()) {
    rd.Invalid(q + ".class_means", "means must be non-empty and of equal length");
  }
  if (!(s.scale >= 0.0)) rd.Invalid(q + ".scale", "must be >= 0");
  if (s.test_per_class[0] + s.test_per_class[1] == 0) {
    rd.Invalid(q + ".test_per_class", "global test set would be empty");
  }
  return s;
}

PartitionPlan ReadPartition(const Reader& rd, const json& j) {
  const std::string p = "partition";
  rd.CheckKeys(j, p, {"mode", "client_count", "counts", "positive_fractions",
                      "train_fraction"});
  PartitionPlan plan;
  const std::string mode = rd.String(rd.Require(j, p, "mode"), p + ".mode");
  plan.mode = rd.Enum(p + ".mode", [&] { return ParsePartitionMode(mode); });
  plan.client_count =
      rd.Count(rd.Require(j, p, "client_count"), p + ".client_count");
  if (const json* v = rd.Find(j, "counts")) plan.counts = rd.Counts(*v, p + ".counts");
  if (const json* v = rd.Find(j, "positive_fractions")) {
    plan.positive_fractions = rd.Reals(*v, p + ".positive_fractions");
  }
  if (const json* v = rd.Find(j, "train_fraction")) {
    plan.train_fraction = rd.Real(*v, p + ".train_fraction");
  }
  try {
    plan.Validate();
  } catch (const InvalidArgument& e) {
    rd.Invalid(p, e.what());
  }
  return plan;
}

EventSpec ReadEvent(const Reader& rd, const json& j, const std::string& p,
                    int rounds) {
  rd.CheckKeys(j, p, {"round", "kind", "client", "resume_round", "count",
                      "positive_fraction", "train_fraction", "epoch_time"});
  EventSpec ev;
  ev.round = static_cast<int>(rd.Int(rd.Require(j, p, "round"), p + ".round"));
  const std::string kind = rd.String(rd.Require(j, p, "kind"), p + ".kind");
  if (kind == "leave") {
    ev.kind = EventKind::kLeave;
  } else if (kind == "join") {
    ev.kind = EventKind::kJoin;
  } else if (kind == "delay") {
    ev.kind = EventKind::kDelay;
  } else {
    rd.Fail(p + ".kind", fmt::format("unknown event kind '{}'", kind));
  }
  ev.client = static_cast<int>(rd.Int(rd.Require(j, p, "client"), p + ".client"));

  auto forbid = [&](std::initializer_list<const char*> keys) {
    for (const char* k : keys) {
      if (rd.Find(j, k)) rd.Fail(p + "." + k, "not allowed for a " + kind + " event");
    }
  };
  switch (ev.kind) {
    case EventKind::kLeave:
      forbid({"resume_round", "count", "positive_fraction", "train_fraction",
              "epoch_time"});
      break;
    case EventKind::kDelay:
      forbid({"count", "positive_fraction", "train_fraction", "epoch_time"});
      ev.resume_round = static_cast<int>(
          rd.Int(rd.Require(j, p, "resume_round"), p + ".resume_round"));
      if (ev.resume_round <= ev.round) {
        rd.Invalid(p + ".resume_round", "must be greater than the event round");
      }
      break;
    case EventKind::kJoin:
      forbid({"resume_round"});
      ev.count = rd.Count(rd.Require(j, p, "count"), p + ".count");
      ev.epoch_time = rd.Real(rd.Require(j, p, "epoch_time"), p + ".epoch_time");
      if (const json* v = rd.Find(j, "positive_fraction")) {
        ev.positive_fraction = rd.Real(*v, p + ".positive_fraction");
        if (!(*ev.positive_fraction >= 0.0 && *ev.positive_fraction <= 1.0)) {
          rd.Invalid(p + ".positive_fraction", "must lie in [0, 1]");
        }
      }
      if (const json* v = rd.Find(j, "train_fraction")) {
        ev.train_fraction = rd.Real(*v, p + ".train_fraction");
        if (!(*ev.train_fraction > 0.0 && *ev.train_fraction <= 1.0)) {
          rd.Invalid(p + ".train_fraction", "must lie in (0, 1]");
        }
      }
      if (ev.count == 0) rd.Invalid(p + ".count", "must be positive");
      if (!(ev.epoch_time > 0.0)) rd.Invalid(p + ".epoch_time", "must be positive");
      break;
  }
  if (ev.round < 1 || ev.round > rounds) {
    rd.Invalid(p + ".round", fmt::format("must lie in 1..{}", rounds));
  }
  return ev;
}

}  // namespace

bool RunConfig::HasFormat(ReportFormat f) const {
  return std::find(report_formats.begin(), report_formats.end(), f) !=
         report_formats.end();
}

RunConfig ParseRunConfig(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(ConfigError::Kind::kParse,
                      fmt::format("config syntax error at line {}: {}",
                                  LineOfOffset(text, e.byte > 0 ? e.byte - 1 : 0),
                                  e.what()));
  }
  const Reader rd(text);
  rd.CheckKeys(doc, "", {"seed", "rounds", "model", "training", "data",
                         "partition", "epoch_times", "events", "policy",
                         "aggregator", "noise", "centralized_epoch_time",
                         "roc_rounds", "output_directory", "report_formats",
                         "threads", "sweep_overrides"});
  RunConfig c;
  if (const json* v = rd.Find(doc, "seed")) c.seed = rd.U64(*v, "seed");

  const std::int64_t rounds = rd.Int(rd.Require(doc, "", "rounds"), "rounds");
  if (rounds < 1) rd.Invalid("rounds", fmt::format("N_r must be >= 1, got {}", rounds));
  c.rounds = static_cast<int>(rounds);

  c.model = ReadModel(rd, rd.Require(doc, "", "model"));

  if (const json* t = rd.Find(doc, "training")) {
    rd.CheckKeys(*t, "training", {"local_epochs", "batch_size", "learning_rate"});
    if (const json* v = rd.Find(*t, "local_epochs")) {
      const auto e = rd.Int(*v, "training.local_epochs");
      if (e < 1) rd.Invalid("training.local_epochs", "N_e must be >= 1");
      c.local_epochs = static_cast<int>(e);
    }
    if (const json* v = rd.Find(*t, "batch_size")) {
      c.batch_size = rd.Count(*v, "training.batch_size");
      if (c.batch_size == 0) rd.Invalid("training.batch_size", "must be positive");
    }
    if (const json* v = rd.Find(*t, "learning_rate")) {
      c.learning_rate = rd.Real(*v, "training.learning_rate");
      if (!(c.learning_rate >= 0.0)) {
        rd.Invalid("training.learning_rate", "must be >= 0");
      }
    }
  }

  c.data = ReadData(rd, rd.Require(doc, "", "data"));
  c.partition = ReadPartition(rd, rd.Require(doc, "", "partition"));

  const json& times = rd.Require(doc, "", "epoch_times");
  if (times.is_number()) {
    c.epoch_time_scalar = true;
    c.epoch_times.assign(c.partition.client_count, rd.Real(times, "epoch_times"));
  } else {
    c.epoch_times = rd.Reals(times, "epoch_times");
    if (c.epoch_times.size() != c.partition.client_count) {
      rd.Invalid("epoch_times",
                 fmt::format("{} entries for {} clients", c.epoch_times.size(),
                             c.partition.client_count));
    }
  }
  for (double t : c.epoch_times) {
    if (!(t > 0.0) || !std::isfinite(t)) rd.Invalid("epoch_times", "must be positive");
  }

  if (const json* v = rd.Find(doc, "events")) {
    for (std::size_t i = 0; i < rd.Array(*v, "events").size(); ++i) {
      c.events.push_back(
          ReadEvent(rd, (*v)[i], fmt::format("events[{}]", i), c.rounds));
    }
  }

  if (const json* p = rd.Find(doc, "policy")) {
    rd.CheckKeys(*p, "policy", {"departure", "delay", "rejoin_at_resume_round"});
    if (const json* v = rd.Find(*p, "departure")) {
      const std::string s = rd.String(*v, "policy.departure");
      c.policy.departure =
          rd.Enum("policy.departure", [&] { return ParseDeparturePolicy(s); });
    }
    if (const json* v = rd.Find(*p, "delay")) {
      const std::string s = rd.String(*v, "policy.delay");
      c.policy.delay = rd.Enum("policy.delay", [&] { return ParseDelayPolicy(s); });
    }
    if (const json* v = rd.Find(*p, "rejoin_at_resume_round")) {
      c.policy.rejoin_at_resume_round = rd.Bool(*v, "policy.rejoin_at_resume_round");
    }
  }

  if (const json* v = rd.Find(doc, "aggregator")) {
    const std::string s = rd.String(*v, "aggregator");
    c.aggregator = rd.Enum("aggregator", [&] { return ParseAggregator(s); });
  }

  if (const json* n = rd.Find(doc, "noise")) {
    rd.CheckKeys(*n, "noise", {"amplitude", "placement"});
    NoiseConfig nc;
    nc.amplitude = rd.Real(rd.Require(*n, "noise", "amplitude"), "noise.amplitude");
    if (!(nc.amplitude > 0.0)) rd.Invalid("noise.amplitude", "must be positive");
    if (const json* v = rd.Find(*n, "placement")) {
      const std::string s = rd.String(*v, "noise.placement");
      nc.placement = rd.Enum("noise.placement", [&] { return ParseNoisePlacement(s); });
    }
    c.noise = nc;
  }

  if (const json* v = rd.Find(doc, "centralized_epoch_time")) {
    c.centralized_epoch_time = rd.Real(*v, "centralized_epoch_time");
    if (!(*c.centralized_epoch_time > 0.0)) {
      rd.Invalid("centralized_epoch_time", "must be positive");
    }
  }

  if (const json* v = rd.Find(doc, "roc_rounds")) {
    for (std::size_t i = 0; i < rd.Array(*v, "roc_rounds").size(); ++i) {
      const auto r = rd.Int((*v)[i], fmt::format("roc_rounds[{}]", i));
      if (r < 1 || r > c.rounds) {
        rd.Invalid("roc_rounds", fmt::format("round {} outside 1..{}", r, c.rounds));
      }
      c.roc_rounds.push_back(static_cast<int>(r));
    }
  }

  if (const json* v = rd.Find(doc, "output_directory")) {
    c.output_directory = rd.String(*v, "output_directory");
  }

  if (const json* v = rd.Find(doc, "report_formats")) {
    c.report_formats.clear();
    for (std::size_t i = 0; i < rd.Array(*v, "report_formats").size(); ++i) {
      const std::string f = rd.String((*v)[i], fmt::format("report_formats[{}]", i));
      if (f == "csv") {
        c.report_formats.push_back(ReportFormat::kCsv);
      } else if (f == "json") {
        c.report_formats.push_back(ReportFormat::kJson);
      } else {
        rd.Fail("report_formats", fmt::format("unknown format '{}'", f));
      }
    }
  }

  if (const json* v = rd.Find(doc, "threads")) {
    const auto t = rd.Int(*v, "threads");
    if (t < 1) rd.Invalid("threads", "must be >= 1");
    c.threads = static_cast<int>(t);
  }

  if (const json* v = rd.Find(doc, "sweep_overrides")) {
    if (!v->is_object()) rd.Fail("sweep_overrides", "expected an object");
    for (const auto& [var, table] : v->items()) {
      if (var != "client-count" && var != "N_r" && var != "policy") {
        rd.Fail("sweep_overrides." + var, "unknown sweep variable");
      }
      if (!table.is_object()) rd.Fail("sweep_overrides." + var, "expected an object");
    }
    c.sweep_overrides = *v;
  }
  return c;
}

RunConfig LoadRunConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(ConfigError::Kind::kParse, "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseRunConfig(ss.str());
}

json ToJson(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["rounds"] = c.rounds;
  j["model"] = {{"kind", ToString(c.model.kind)},
                {"input_dim", c.model.input_dim}};
  if (c.model.kind == ModelKind::kMlp1Hidden) {
    j["model"]["hidden_dim"] = c.model.hidden_dim;
    j["model"]["activation"] = ToString(c.model.activation);
  }
  j["training"] = {{"local_epochs", c.local_epochs},
                   {"batch_size", c.batch_size},
                   {"learning_rate", c.learning_rate}};
  if (const auto* s = std::get_if<SyntheticData>(&c.data)) {
    j["data"]["synthetic"] = {{"class_means", s->class_means},
                              {"scale", s->scale},
                              {"per_class", s->per_class},
                              {"test_per_class", s->test_per_class}};
  } else {
    const auto& d = std::get<CsvData>(c.data);
    j["data"]["csv"] = {{"master", d.master}, {"test", d.test}};
  }
  json part = {{"mode", ToString(c.partition.mode)},
               {"client_count", c.partition.client_count},
               {"train_fraction", c.partition.train_fraction}};
  if (c.partition.counts) part["counts"] = *c.partition.counts;
  if (c.partition.positive_fractions) {
    part["positive_fractions"] = *c.partition.positive_fractions;
  }
  j["partition"] = part;
  if (c.epoch_time_scalar && !c.epoch_times.empty()) {
    j["epoch_times"] = c.epoch_times.front();
  } else {
    j["epoch_times"] = c.epoch_times;
  }
  j["events"] = json::array();
  for (const auto& ev : c.events) {
    json e = {{"round", ev.round}, {"kind", ToString(ev.kind)}, {"client", ev.client}};
    if (ev.kind == EventKind::kDelay) e["resume_round"] = ev.resume_round;
    if (ev.kind == EventKind::kJoin) {
      e["count"] = ev.count;
      e["epoch_time"] = ev.epoch_time;
      if (ev.positive_fraction) e["positive_fraction"] = *ev.positive_fraction;
      if (ev.train_fraction) e["train_fraction"] = *ev.train_fraction;
    }
    j["events"].push_back(e);
  }
  j["policy"] = {{"departure", ToString(c.policy.departure)},
                 {"delay", ToString(c.policy.delay)},
                 {"rejoin_at_resume_round", c.policy.rejoin_at_resume_round}};
  j["aggregator"] = ToString(c.aggregator);
  if (c.noise) {
    j["noise"] = {{"amplitude", c.noise->amplitude},
                  {"placement", ToString(c.noise->placement)}};
  }
  if (c.centralized_epoch_time) {
    j["centralized_epoch_time"] = *c.centralized_epoch_time;
  }
  j["roc_rounds"] = c.roc_rounds;
  if (c.output_directory) j["output_directory"] = *c.output_directory;
  j["report_formats"] = json::array();
  for (auto f : c.report_formats) {
    j["report_formats"].push_back(f == ReportFormat::kCsv ? "csv" : "json");
  }
  j["threads"] = c.threads;
  if (!c.sweep_overrides.empty()) j["sweep_overrides"] = c.sweep_overrides;
  return j;
}

namespace {

[[noreturn]] void Invalid(const std::string& msg) {
  throw ConfigError(ConfigError::Kind::kValidation, msg);
}

// Pulls joiner samples out of the reserve (master samples no initial client
// holds), in a seeded order, consuming them across joins.
class Reserve {
 public:
  Reserve(const Dataset& master, std::vector<std::size_t> positions,
          std::uint64_t seed)
      : master_(master), positions_(std::move(positions)) {
    Rng(seed).Shuffle(positions_);
    taken_.assign(positions_.size(), false);
  }

  Dataset Take(std::size_t count, std::optional<double> positive_fraction) {
    std::size_t want_pos = 0;
    if (positive_fraction) {
      const std::size_t c[] = {count};
      const double f[] = {*positive_fraction};
      want_pos = PositiveTargets(c, f)[0];
    }
    std::vector<std::size_t> picked;
    std::size_t got_pos = 0, got_neg = 0;
    for (std::size_t i = 0; i < positions_.size() && picked.size() < count; ++i) {
      if (taken_[i]) continue;
      const int label = master_.Label(positions_[i]);
      if (positive_fraction) {
        if (label == 1 && got_pos >= want_pos) continue;
        if (label == 0 && got_neg >= count - want_pos) continue;
      }
      (label == 1 ? got_pos : got_neg) += 1;
      taken_[i] = true;
      picked.push_back(positions_[i]);
    }
    if (picked.size() < count) {
      throw InfeasiblePartition(fmt::format(
          "only {} suitable unassigned samples left for a joiner of {}",
          picked.size(), count));
    }
    return master_.Subset(picked);
  }

 private:
  const Dataset& master_;
  std::vector<std::size_t> positions_;
  std::vector<bool> taken_;
};

}  // namespace

PreparedRun Prepare(const RunConfig& c) {
  PreparedRun out;
  Dataset test;
  try {
    if (const auto* s = std::get_if<SyntheticData>(&c.data)) {
      out.master = MakeSynthetic({s->class_means, s->scale, s->per_class,
                                  DeriveSeed(c.seed, {kMasterTag}), 0});
      test = MakeSynthetic({s->class_means, s->scale, s->test_per_class,
                            DeriveSeed(c.seed, {kTestTag}), kTestIdBase});
    } else {
      const auto& d = std::get<CsvData>(c.data);
      out.master = LoadDatasetCsv(d.master);
      test = LoadDatasetCsv(d.test);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    Invalid(fmt::format("data: {}", e.what()));
  }
  if (out.master.dim() != c.model.input_dim || test.dim() != c.model.input_dim) {
    Invalid(fmt::format("data: feature width {} / {} does not match model input_dim {}",
                        out.master.dim(), test.dim(), c.model.input_dim));
  }

  PartitionPlan plan = c.partition;
  plan.seed = DeriveSeed(c.seed, {kPartitionTag});
  try {
    out.shards = Partition(out.master, plan);
  } catch (const Error& e) {
    Invalid(fmt::format("partition: {}", e.what()));
  }

  SimPlan& sp = out.plan;
  sp.model = c.model;
  sp.train.epochs = c.local_epochs;
  sp.train.batch_size = c.batch_size;
  sp.train.learning_rate = c.learning_rate;
  sp.rounds = c.rounds;
  sp.policy = c.policy;
  sp.aggregator = c.aggregator;
  sp.noise = c.noise;
  sp.global_test = std::move(test);
  sp.seed = c.seed;
  sp.threads = c.threads;
  for (std::size_t i = 0; i < out.shards.size(); ++i) {
    sp.clients.push_back({out.shards[i], c.epoch_times[i]});
  }

  Reserve reserve(out.master, UnassignedPositions(out.master, out.shards),
                  DeriveSeed(c.seed, {kJoinTag}));
  std::vector<std::size_t> order(c.events.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return c.events[a].round < c.events[b].round;
  });
  sp.events.resize(c.events.size());
  for (std::size_t i : order) {
    const EventSpec& e = c.events[i];
    IntermittencyEvent& ev = sp.events[i];
    ev.round = e.round;
    ev.kind = e.kind;
    ev.client_id = e.client;
    ev.resume_round = e.resume_round;
    if (e.kind != EventKind::kJoin) continue;
    try {
      const Dataset samples = reserve.Take(e.count, e.positive_fraction);
      ev.joiner = ClientSetup{
          SplitTrainTest(e.client, samples,
                         e.train_fraction.value_or(c.partition.train_fraction),
                         plan.seed),
          e.epoch_time};
    } catch (const Error& err) {
      Invalid(fmt::format("events[{}] ({}): {}", i, ev.Describe(), err.what()));
    }
  }

  try {
    ValidatePlan(sp);
  } catch (const InvalidArgument& e) {
    Invalid(e.what());
  }
  out.static_sim_time = StaticSimTime(c.rounds, c.local_epochs, c.epoch_times);
  if (c.centralized_epoch_time) {
    out.centralized_time = static_cast<double>(c.rounds) *
                           static_cast<double>(c.local_epochs) *
                           *c.centralized_epoch_time;
  }
  return out;
}

}  // namespace fedsim
