#include "synthal/config.hpp"

#include <charconv>
#include <functional>
#include <set>
#include <vector>

#include "synthal/io.hpp"

namespace synthal::config {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

template <typename T>
T parse_number(std::string_view s, std::string_view key) {
    T v{};
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (!s.empty() && s.front() == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || first == last) {
        throw ConfigError("'" + std::string(key) + "': cannot parse '" + std::string(s) + "'");
    }
    return v;
}

std::pair<std::string_view, std::string_view> split_range(std::string_view s, std::string_view key) {
    if (s.empty() || s.front() != '[') return {s, s};
    if (s.back() != ']') throw ConfigError("'" + std::string(key) + "': unterminated range");
    const auto inner = s.substr(1, s.size() - 2);
    const auto comma = inner.find(',');
    if (comma == std::string_view::npos || inner.find(',', comma + 1) != std::string_view::npos) {
        throw ConfigError("'" + std::string(key) + "': range needs exactly two values");
    }
    return {trim(inner.substr(0, comma)), trim(inner.substr(comma + 1))};
}

synth::Range parse_range(std::string_view s, std::string_view key) {
    auto [a, b] = split_range(s, key);
    synth::Range r{parse_number<double>(a, key), parse_number<double>(b, key)};
    if (!(r.lo <= r.hi)) throw ConfigError("'" + std::string(key) + "': range needs lo <= hi");
    return r;
}

synth::IntRange parse_int_range(std::string_view s, std::string_view key) {
    auto [a, b] = split_range(s, key);
    synth::IntRange r{parse_number<int>(a, key), parse_number<int>(b, key)};
    if (r.lo > r.hi) throw ConfigError("'" + std::string(key) + "': range needs lo <= hi");
    return r;
}

std::string fmt(const synth::Range& r) { return r.lo == r.hi ? fmt(r.lo) : "[" + fmt(r.lo) + ", " + fmt(r.hi) + "]"; }

std::string fmt(const synth::IntRange& r) {
    return r.lo == r.hi ? std::to_string(r.lo) : "[" + std::to_string(r.lo) + ", " + std::to_string(r.hi) + "]";
}

bool parse_bool(std::string_view s, std::string_view key) {
    if (s == "true") return true;
    if (s == "false") return false;
    throw ConfigError("'" + std::string(key) + "': expected true or false");
}

const char* fmt(bool b) { return b ? "true" : "false"; }

imaging::TrimShape parse_trim(std::string_view s) {
    if (s == "none") return imaging::TrimShape::none;
    if (s == "circle") return imaging::TrimShape::circle;
    if (s == "rectangle") return imaging::TrimShape::rectangle;
    throw ConfigError("'trim': expected none, circle or rectangle");
}

RandomMode parse_random_mode(std::string_view s) {
    if (s == "init") return RandomMode::init;
    if (s == "interleaved") return RandomMode::interleaved;
    throw ConfigError("'random_mode': expected init or interleaved");
}

TrainerMode parse_trainer_mode(std::string_view s) {
    if (s == "mock") return TrainerMode::mock;
    if (s == "external") return TrainerMode::external;
    throw ConfigError("'mode': expected mock or external");
}

struct Field {
    const char* section;
    const char* key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, std::string_view)> set;
};

#define SYNTHAL_RANGE(sec, name, member)                                       \
    Field{sec, name, [](const RunConfig& c) { return fmt(c.member); },         \
          [](RunConfig& c, std::string_view v) { c.member = parse_range(v, name); }}
#define SYNTHAL_IRANGE(sec, name, member)                                      \
    Field{sec, name, [](const RunConfig& c) { return fmt(c.member); },         \
          [](RunConfig& c, std::string_view v) { c.member = parse_int_range(v, name); }}
#define SYNTHAL_REAL(sec, name, member)                                        \
    Field{sec, name, [](const RunConfig& c) { return fmt(c.member); },         \
          [](RunConfig& c, std::string_view v) { c.member = parse_number<double>(v, name); }}
#define SYNTHAL_INT(sec, name, member)                                         \
    Field{sec, name, [](const RunConfig& c) { return std::to_string(c.member); }, \
          [](RunConfig& c, std::string_view v) { c.member = parse_number<int>(v, name); }}
#define SYNTHAL_BOOL(sec, name, member)                                        \
    Field{sec, name, [](const RunConfig& c) { return std::string(fmt(c.member)); }, \
          [](RunConfig& c, std::string_view v) { c.member = parse_bool(v, name); }}
#define SYNTHAL_TEXT(sec, name, member)                                        \
    Field{sec, name, [](const RunConfig& c) { return c.member; },              \
          [](RunConfig& c, std::string_view v) { c.member = std::string(v); }}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        SYNTHAL_TEXT("dataset", "root", dataset.root),
        SYNTHAL_TEXT("dataset", "run_dir", dataset.run_dir),
        Field{"dataset", "seed", [](const RunConfig& c) { return std::to_string(c.dataset.seed); },
              [](RunConfig& c, std::string_view v) { c.dataset.seed = parse_number<std::uint64_t>(v, "seed"); }},

        SYNTHAL_REAL("budget", "fraction", budget.fraction),
        SYNTHAL_INT("budget", "al_iterations", budget.al_iterations),
        Field{"budget", "random_mode", [](const RunConfig& c) { return std::string(to_string(c.budget.random_mode)); },
              [](RunConfig& c, std::string_view v) { c.budget.random_mode = parse_random_mode(v); }},

        SYNTHAL_RANGE("synthesis", "resize_ratio", synthesis.resize_ratio),
        SYNTHAL_RANGE("synthesis", "move_w", synthesis.move_w),
        SYNTHAL_RANGE("synthesis", "move_h", synthesis.move_h),
        SYNTHAL_RANGE("synthesis", "rotation_deg", synthesis.rotation_deg),
        SYNTHAL_RANGE("synthesis", "color_alpha", synthesis.color_alpha),
        SYNTHAL_RANGE("synthesis", "brightness_beta", synthesis.brightness_beta),
        SYNTHAL_INT("synthesis", "type1_per_query", synthesis.type1_per_query),
        SYNTHAL_INT("synthesis", "type2_per_query", synthesis.type2_per_query),
        SYNTHAL_INT("synthesis", "multi_blend", synthesis.multi_blend),
        SYNTHAL_BOOL("synthesis", "external_backgrounds", synthesis.use_external_backgrounds),
        SYNTHAL_BOOL("synthesis", "background_inpainting", synthesis.use_inpainting),

        SYNTHAL_IRANGE("fusion", "dilation_d", synthesis.dilation_d),
        SYNTHAL_IRANGE("fusion", "fusion_k", synthesis.fusion_k),
        SYNTHAL_REAL("fusion", "sigma_divisor", synthesis.sigma_divisor),

        Field{"trim", "trim", [](const RunConfig& c) { return std::string(imaging::to_string(c.synthesis.trim_shape)); },
              [](RunConfig& c, std::string_view v) { c.synthesis.trim_shape = parse_trim(v); }},
        SYNTHAL_RANGE("trim", "trim_circle_x", synthesis.trim_circle_x),
        SYNTHAL_RANGE("trim", "trim_circle_y", synthesis.trim_circle_y),
        SYNTHAL_RANGE("trim", "trim_circle_r", synthesis.trim_circle_r),
        SYNTHAL_IRANGE("trim", "trim_rect_top", synthesis.trim_rect_top),
        SYNTHAL_IRANGE("trim", "trim_rect_bottom", synthesis.trim_rect_bottom),
        SYNTHAL_IRANGE("trim", "trim_rect_left", synthesis.trim_rect_left),
        SYNTHAL_IRANGE("trim", "trim_rect_right", synthesis.trim_rect_right),
        SYNTHAL_INT("trim", "final_blur_k", synthesis.final_blur_k),
        SYNTHAL_REAL("trim", "final_blur_sigma", synthesis.final_blur_sigma),

        Field{"query", "strategy", [](const RunConfig& c) { return std::string(query::to_string(c.query.strategy)); },
              [](RunConfig& c, std::string_view v) {
                  try {
                      c.query.strategy = query::parse_strategy(std::string(v));
                  } catch (const InvalidParameter& e) {
                      throw ConfigError(e.detail());
                  }
              }},
        SYNTHAL_TEXT("query", "aggregator", query.aggregator),

        Field{"trainer", "mode", [](const RunConfig& c) { return std::string(to_string(c.trainer.mode)); },
              [](RunConfig& c, std::string_view v) { c.trainer.mode = parse_trainer_mode(v); }},
        SYNTHAL_TEXT("trainer", "command", trainer.command),
        SYNTHAL_INT("trainer", "committee_size", trainer.committee_size),
        SYNTHAL_REAL("trainer", "timeout", trainer.timeout_s),
    };
    return table;
}

#undef SYNTHAL_RANGE
#undef SYNTHAL_IRANGE
#undef SYNTHAL_REAL
#undef SYNTHAL_INT
#undef SYNTHAL_BOOL
#undef SYNTHAL_TEXT

constexpr const char* kSections[] = {"dataset", "budget", "synthesis", "fusion", "trim", "query", "trainer"};

}  // namespace

const char* to_string(RandomMode m) noexcept { return m == RandomMode::init ? "init" : "interleaved"; }
const char* to_string(TrainerMode m) noexcept { return m == TrainerMode::mock ? "mock" : "external"; }

void RunConfig::validate() const {
    try {
        synthesis.validate();
        query::Aggregator::parse(query.aggregator);
    } catch (const InvalidParameter& e) {
        throw ConfigError(e.detail());
    }
    if (!(budget.fraction > 0.0 && budget.fraction <= 1.0)) throw ConfigError("budget fraction must lie in (0,1]");
    if (budget.al_iterations < 0) throw ConfigError("al_iterations must be >= 0");
    if (budget.fraction < 1.0 && budget.al_iterations < 1) {
        throw ConfigError("al_iterations must be >= 1 below a 100% budget");
    }
    if (trainer.committee_size < 1) throw ConfigError("committee_size must be >= 1");
    if (!(trainer.timeout_s > 0.0)) throw ConfigError("trainer timeout must be > 0");
    if (trainer.mode == TrainerMode::external && trim(trainer.command).empty()) {
        throw ConfigError("external trainer mode needs a command");
    }
    for (const std::string* s : {&dataset.root, &dataset.run_dir, &trainer.command, &query.aggregator}) {
        if (trim(*s) != *s) throw ConfigError("text values cannot start or end with whitespace or span lines");
    }
}

RunConfig RunConfig::preset(std::string_view name) {
    RunConfig cfg;
    if (name == "live") {
        cfg.synthesis = synth::SynthesisConfig::sinus_live();
    } else if (name == "cadaver") {
        cfg.synthesis = synth::SynthesisConfig::sinus_cadaver();
    } else if (name == "endovis") {
        cfg.synthesis = synth::SynthesisConfig::endovis();
    } else {
        throw ConfigError("unknown preset '" + std::string(name) + "' (live, cadaver, endovis)");
    }
    return cfg;
}

RunConfig parse_run_config(std::string_view text) {
    RunConfig cfg;
    std::string section;
    std::set<std::string> seen;
    int lineno = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        const auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++lineno;
        const auto line = trim(raw);
        if (line.empty() || line.front() == '#' || line.front() == ';') continue;
        const std::string where = "line " + std::to_string(lineno) + ": ";
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(where + "malformed section header");
            section = std::string(trim(line.substr(1, line.size() - 2)));
            bool known = false;
            for (const char* s : kSections) known = known || section == s;
            if (!known) throw ConfigError(where + "unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ConfigError(where + "expected key = value");
        if (section.empty()) throw ConfigError(where + "key outside a section");
        const std::string key(trim(line.substr(0, eq)));
        const auto value = trim(line.substr(eq + 1));
        const Field* field = nullptr;
        for (const auto& f : fields()) {
            if (section == f.section && key == f.key) field = &f;
        }
        if (!field) throw ConfigError(where + "unknown key '" + key + "' in [" + section + "]");
        if (!seen.insert(section + "." + key).second) throw ConfigError(where + "duplicate key '" + key + "'");
        try {
            field->set(cfg, value);
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.detail());
        }
    }
    cfg.validate();
    return cfg;
}

std::string serialize(const RunConfig& cfg) {
    cfg.validate();
    std::string out;
    std::string current;
    for (const auto& f : fields()) {
        if (current != f.section) {
            if (!current.empty()) out += '\n';
            current = f.section;
            out += "[" + current + "]\n";
        }
        const std::string value = f.get(cfg);
        out += f.key;
        out += value.empty() ? " =" : " = " + value;
        out += '\n';
    }
    return out;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::string text;
    try {
        text = io::read_file(path);
    } catch (const DatasetError& e) {
        throw ConfigError(e.detail());
    }
    return parse_run_config(text);
}

}  // namespace synthal::config
