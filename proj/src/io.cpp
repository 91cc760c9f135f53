#include "ghz/io.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "ghz/error.hpp"

namespace ghz::io {

namespace {

// Collects diagnostics while pulling typed values out of a document.
class Reader {
 public:
  explicit Reader(const json& root) : root_(root) {}

  const json* at(const json& obj, const std::string& ptr, const char* key, bool required = true) {
    if (!obj.is_object()) {
      fail(ptr, "expected an object");
      return nullptr;
    }
    auto it = obj.find(key);
    if (it == obj.end()) {
      if (required) fail(ptr + "/" + key, "missing field");
      return nullptr;
    }
    return &*it;
  }

  std::optional<double> real(const json& obj, const std::string& ptr, const char* key, bool required = true) {
    const json* v = at(obj, ptr, key, required);
    if (!v) return std::nullopt;
    if (!v->is_number()) {
      fail(ptr + "/" + key, "expected a number");
      return std::nullopt;
    }
    return v->get<double>();
  }

  std::optional<std::uint64_t> count(const json& v, const std::string& ptr) {
    if (v.is_number_integer() && v.get<std::int64_t>() < 0) {
      fail(ptr, "negative count");
      return std::nullopt;
    }
    if (!v.is_number_unsigned() && !v.is_number_integer()) {
      fail(ptr, "expected a non-negative integer");
      return std::nullopt;
    }
    return v.get<std::uint64_t>();
  }

  std::optional<std::uint64_t> count(const json& obj, const std::string& ptr, const char* key,
                                     bool required = true) {
    const json* v = at(obj, ptr, key, required);
    if (!v) return std::nullopt;
    return count(*v, ptr + "/" + key);
  }

  std::optional<std::string> text(const json& obj, const std::string& ptr, const char* key, bool required = true) {
    const json* v = at(obj, ptr, key, required);
    if (!v) return std::nullopt;
    if (!v->is_string()) {
      fail(ptr + "/" + key, "expected a string");
      return std::nullopt;
    }
    return v->get<std::string>();
  }

  void header(const char* schema) {
    const auto s = text(root_, "", "schema");
    if (s && *s != schema) fail("/schema", "expected '" + std::string(schema) + "', found '" + *s + "'");
    const json* v = at(root_, "", "schema_version");
    if (v && (!v->is_number_integer() || v->get<int>() != kSchemaVersion)) {
      fail("/schema_version", "unsupported version (expected " + std::to_string(kSchemaVersion) + ")");
    }
  }

  void fail(const std::string& ptr, const std::string& msg) { diag_.push_back((ptr.empty() ? "/" : ptr) + ": " + msg); }
  void finish() const {
    if (!diag_.empty()) throw SchemaError(diag_);
  }
  bool ok() const { return diag_.empty(); }

 private:
  const json& root_;
  std::vector<std::string> diag_;
};

}  // namespace

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::experimental: return "experimental";
    case Provenance::simulated: return "simulated";
    case Provenance::reconstructed: return "reconstructed";
  }
  return "experimental";
}

Provenance parse_provenance(const std::string& s) {
  if (s == "experimental") return Provenance::experimental;
  if (s == "simulated") return Provenance::simulated;
  if (s == "reconstructed") return Provenance::reconstructed;
  throw SchemaError({"/provenance: expected experimental, simulated or reconstructed"});
}

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json to_json(const CountFile& f) {
  json j;
  j["schema"] = "ghz.counts";
  j["schema_version"] = kSchemaVersion;
  j["n"] = f.data.n;
  j["provenance"] = to_string(f.provenance);
  if (!f.notes.empty()) j["notes"] = f.notes;
  json settings = json::array();
  for (const auto& s : f.data.settings) {
    json r;
    r["setting"] = s.setting.name();
    if (s.setting.kind == witness::Setting::Kind::z) {
      r["aggregate"] = {{"all_h", s.all_h}, {"all_v", s.all_v}, {"rest", s.rest}};
    } else {
      r["aggregate"] = {{"plus", s.plus}, {"minus", s.minus}};
    }
    if (s.histogram) {
      json h = json::object();
      for (const auto& [k, c] : *s.histogram) h[k] = c;
      r["histogram"] = h;
    }
    if (s.hours > 0) r["hours"] = s.hours;
    settings.push_back(r);
  }
  j["settings"] = settings;
  return j;
}

CountFile count_file_from_json(const json& j) {
  Reader rd(j);
  rd.header("ghz.counts");
  CountFile f;
  const auto n = rd.count(j, "", "n");
  if (n && (*n < 1 || *n > 64)) rd.fail("/n", "photon number must lie in [1, 64]");
  if (n) f.data.n = static_cast<int>(*n);
  if (auto p = rd.text(j, "", "provenance")) {
    try {
      f.provenance = parse_provenance(*p);
    } catch (const SchemaError& e) {
      rd.fail("/provenance", "expected experimental, simulated or reconstructed");
    }
  }
  if (auto notes = rd.text(j, "", "notes", false)) f.notes = *notes;

  const json* settings = rd.at(j, "", "settings");
  std::set<std::string> seen;
  if (settings && !settings->is_array()) rd.fail("/settings", "expected an array");
  if (settings && settings->is_array()) {
    for (std::size_t i = 0; i < settings->size(); ++i) {
      const json& r = (*settings)[i];
      const std::string ptr = "/settings/" + std::to_string(i);
      const auto name = rd.text(r, ptr, "setting");
      if (!name) continue;
      witness::Setting setting;
      try {
        setting = witness::Setting::parse(*name);
      } catch (const Error&) {
        rd.fail(ptr + "/setting", "unknown setting '" + *name + "'");
        continue;
      }
      if (!seen.insert(setting.name()).second) rd.fail(ptr + "/setting", "duplicate setting " + setting.name());
      if (n && setting.kind == witness::Setting::Kind::m && setting.k >= static_cast<int>(*n)) {
        rd.fail(ptr + "/setting", "index out of range for n=" + std::to_string(*n));
        continue;
      }

      witness::SettingCounts sc;
      sc.setting = setting;
      const json* hist = rd.at(r, ptr, "histogram", false);
      const json* agg = rd.at(r, ptr, "aggregate", false);
      if (!hist && !agg) rd.fail(ptr, "needs a histogram or an aggregate");
      bool hist_ok = false;
      if (hist) {
        if (!hist->is_object()) {
          rd.fail(ptr + "/histogram", "expected an object");
        } else {
          witness::Histogram h;
          bool good = true;
          for (const auto& [k, v] : hist->items()) {
            const auto c = rd.count(v, ptr + "/histogram/" + k);
            if (!c) {
              good = false;
              continue;
            }
            h[k] = *c;
          }
          if (good && n) {
            try {
              sc = witness::SettingCounts::from_histogram(setting, static_cast<int>(*n), std::move(h));
              hist_ok = true;
            } catch (const Error& e) {
              rd.fail(ptr + "/histogram", e.what());
            }
          }
        }
      }
      if (agg) {
        const std::string ap = ptr + "/aggregate";
        if (setting.kind == witness::Setting::Kind::z) {
          const auto h = rd.count(*agg, ap, "all_h"), v = rd.count(*agg, ap, "all_v"), rest = rd.count(*agg, ap, "rest");
          if (h && v && rest) {
            if (hist_ok && (sc.all_h != *h || sc.all_v != *v || sc.rest != *rest)) {
              rd.fail(ap, "aggregate disagrees with histogram");
            }
            sc.all_h = *h;
            sc.all_v = *v;
            sc.rest = *rest;
          }
        } else {
          const auto p = rd.count(*agg, ap, "plus"), m = rd.count(*agg, ap, "minus");
          if (p && m) {
            if (hist_ok && (sc.plus != *p || sc.minus != *m)) rd.fail(ap, "aggregate disagrees with histogram");
            sc.plus = *p;
            sc.minus = *m;
          }
        }
      }
      if (auto hours = rd.real(r, ptr, "hours", false)) {
        if (*hours < 0) rd.fail(ptr + "/hours", "must be non-negative");
        sc.hours = *hours;
      }
      f.data.settings.push_back(std::move(sc));
    }
  }
  if (n && settings && settings->is_array()) {
    if (!seen.contains("Z")) rd.fail("/settings", "missing setting Z");
    for (std::uint64_t k = 0; k < *n; ++k) {
      if (!seen.contains("M" + std::to_string(k))) rd.fail("/settings", "missing setting M" + std::to_string(k));
    }
  }
  rd.finish();
  return f;
}

json to_json(const hyptest::TrialLedger& l) {
  return {{"schema", "ghz.ledger"}, {"schema_version", kSchemaVersion}, {"n", l.n}, {"n_z", l.n_z},
          {"n_k", l.n_k},           {"f_exp", l.f_exp},                  {"f_0", l.f_0}};
}

hyptest::TrialLedger ledger_from_json(const json& j) {
  Reader rd(j);
  rd.header("ghz.ledger");
  hyptest::TrialLedger l;
  if (auto n = rd.count(j, "", "n")) l.n = static_cast<int>(*n);
  if (auto nz = rd.count(j, "", "n_z")) l.n_z = *nz;
  if (const json* nk = rd.at(j, "", "n_k")) {
    if (!nk->is_array()) {
      rd.fail("/n_k", "expected an array");
    } else {
      for (std::size_t i = 0; i < nk->size(); ++i) {
        if (auto c = rd.count((*nk)[i], "/n_k/" + std::to_string(i))) l.n_k.push_back(*c);
      }
      if (rd.ok() && l.n_k.size() != static_cast<std::size_t>(l.n)) rd.fail("/n_k", "needs exactly n entries");
    }
  }
  if (auto f = rd.real(j, "", "f_exp")) l.f_exp = *f;
  if (auto f0 = rd.real(j, "", "f_0", false)) l.f_0 = *f0;
  rd.finish();
  return l;
}

json to_json(const sim::ExperimentConfig& c) {
  json j;
  j["schema"] = "ghz.config";
  j["schema_version"] = kSchemaVersion;
  j["rep_rate"] = c.rep_rate;
  j["seed"] = c.seed;
  j["detector"] = {{"dark_count_prob", c.detector.dark_count_prob}};
  json src = json::array();
  for (const auto& s : c.sources) {
    src.push_back({{"mode_a", s.mode_a},
                   {"mode_b", s.mode_b},
                   {"pair_prob", s.pair_prob},
                   {"double_pair_factor", s.double_pair_factor},
                   {"xi_signal", s.xi_signal},
                   {"xi_idler", s.xi_idler},
                   {"theta_state", s.theta_state},
                   {"rotated", s.rotated}});
  }
  j["sources"] = src;
  json links = json::array();
  for (const auto& [a, b] : c.pbs_links) links.push_back({a, b});
  j["pbs_links"] = links;
  j["mode_overlap"] = c.interference.mode_overlap;
  if (!c.provenance.empty()) j["provenance"] = c.provenance;
  return j;
}

sim::ExperimentConfig config_from_json(const json& j) {
  Reader rd(j);
  rd.header("ghz.config");
  sim::ExperimentConfig c;
  if (auto r = rd.real(j, "", "rep_rate")) c.rep_rate = *r;
  if (auto s = rd.count(j, "", "seed", false)) c.seed = *s;
  if (const json* d = rd.at(j, "", "detector", false)) {
    if (auto p = rd.real(*d, "/detector", "dark_count_prob")) c.detector.dark_count_prob = *p;
  }
  if (const json* src = rd.at(j, "", "sources")) {
    if (!src->is_array()) {
      rd.fail("/sources", "expected an array");
    } else {
      for (std::size_t i = 0; i < src->size(); ++i) {
        const json& r = (*src)[i];
        const std::string ptr = "/sources/" + std::to_string(i);
        sim::SourceModel s;
        if (auto v = rd.count(r, ptr, "mode_a")) s.mode_a = static_cast<int>(*v);
        if (auto v = rd.count(r, ptr, "mode_b")) s.mode_b = static_cast<int>(*v);
        if (auto v = rd.real(r, ptr, "pair_prob")) s.pair_prob = *v;
        if (auto v = rd.real(r, ptr, "double_pair_factor", false)) s.double_pair_factor = *v;
        if (auto v = rd.real(r, ptr, "xi_signal")) s.xi_signal = *v;
        if (auto v = rd.real(r, ptr, "xi_idler")) s.xi_idler = *v;
        if (auto v = rd.real(r, ptr, "theta_state")) s.theta_state = *v;
        if (const json* v = rd.at(r, ptr, "rotated", false)) {
          if (v->is_boolean()) {
            s.rotated = v->get<bool>();
          } else {
            rd.fail(ptr + "/rotated", "expected a boolean");
          }
        }
        try {
          s.validate();
        } catch (const Error& e) {
          rd.fail(ptr, e.what());
        }
        c.sources.push_back(s);
      }
    }
  }
  if (const json* links = rd.at(j, "", "pbs_links")) {
    if (!links->is_array()) {
      rd.fail("/pbs_links", "expected an array");
    } else {
      for (std::size_t i = 0; i < links->size(); ++i) {
        const json& l = (*links)[i];
        if (!l.is_array() || l.size() != 2 || !l[0].is_number_integer() || !l[1].is_number_integer()) {
          rd.fail("/pbs_links/" + std::to_string(i), "expected [mode_a, mode_b]");
          continue;
        }
        c.pbs_links.emplace_back(l[0].get<int>(), l[1].get<int>());
      }
    }
  }
  if (const json* ov = rd.at(j, "", "mode_overlap")) {
    if (!ov->is_array()) {
      rd.fail("/mode_overlap", "expected an array");
    } else {
      for (std::size_t i = 0; i < ov->size(); ++i) {
        if (!(*ov)[i].is_number()) {
          rd.fail("/mode_overlap/" + std::to_string(i), "expected a number");
          continue;
        }
        c.interference.mode_overlap.push_back((*ov)[i].get<double>());
      }
    }
  }
  if (const json* p = rd.at(j, "", "provenance", false); p && p->is_object()) {
    for (const auto& [k, v] : p->items()) {
      if (v.is_string()) c.provenance[k] = v.get<std::string>();
    }
  }
  if (rd.ok()) {
    try {
      c.validate();
    } catch (const Error& e) {
      rd.fail("", e.what());
    }
  }
  rd.finish();
  return c;
}

RatePair rate_pair_from_json(const json& j) {
  Reader rd(j);
  rd.header("ghz.rate_inputs");
  RatePair rp;
  auto one = [&](const char* key, crystal::RateInputs& in, std::string& label) {
    const json* r = rd.at(j, "", key);
    if (!r) return;
    const std::string ptr = std::string("/") + key;
    if (auto v = rd.text(*r, ptr, "label", false)) label = *v;
    if (auto v = rd.real(*r, ptr, "d_eff")) in.d_eff = *v;
    if (auto v = rd.real(*r, ptr, "length_mm")) in.length_mm = *v;
    if (auto v = rd.real(*r, ptr, "n_p")) in.n_p = *v;
    if (auto v = rd.real(*r, ptr, "n_s")) in.n_s = *v;
    if (auto v = rd.real(*r, ptr, "n_i")) in.n_i = *v;
    if (auto v = rd.real(*r, ptr, "walkoff_delta", false)) in.walkoff_delta = *v;
    if (auto v = rd.real(*r, ptr, "omega")) in.omega = *v;
  };
  one("a", rp.a, rp.label_a);
  one("b", rp.b, rp.label_b);
  if (auto t = rd.real(j, "", "target", false)) rp.target = *t;
  rd.finish();
  return rp;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError({path.string() + ": cannot open file"});
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // Translate the byte offset into a line number.
    std::size_t line = 1;
    for (std::size_t i = 0; i < std::min<std::size_t>(e.byte, text.size()); ++i) {
      if (text[i] == '\n') ++line;
    }
    throw SchemaError({path.string() + ":" + std::to_string(line) + ": " + e.what()});
  }
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

json to_json(const RunReport& r) {
  json j;
  j["schema"] = "ghz.report";
  j["schema_version"] = kSchemaVersion;
  j["tool_version"] = r.tool_version;
  j["inputs_digest"] = r.inputs_digest;
  j["timestamp"] = r.timestamp;
  j["provenance"] = r.provenance;
  j["fidelity"] = {{"value", r.fidelity.value},
                   {"sigma", r.fidelity.sigma},
                   {"population_term", r.fidelity.population_term},
                   {"coherence_term", r.fidelity.coherence_term}};
  j["verdict"] = {{"threshold", r.verdict.threshold}, {"sigmas", number(r.verdict.sigmas)}, {"genuine", r.verdict.genuine}};
  j["pvalue"] = {{"bound", r.pvalue.bound},
                 {"x_arg", number(r.pvalue.x_arg)},
                 {"branch", hyptest::to_string(r.pvalue.branch)},
                 {"informative", r.pvalue.informative}};
  if (!r.pvalue.note.empty()) j["pvalue"]["note"] = r.pvalue.note;
  j["diagnostics"] = {{"population_fraction", r.population.population_fraction},
                      {"signal_to_noise", number(r.population.signal_to_noise)}};
  json corr = json::object();
  for (const auto& [k, v] : r.correlations) corr[k] = v;
  j["diagnostics"]["correlations"] = corr;
  return j;
}

}  // namespace ghz::io
