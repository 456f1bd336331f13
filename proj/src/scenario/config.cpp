#include "fmtrojan/scenario.hpp"

#include "../common/rng.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace fmtrojan::scenario {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
        s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.remove_suffix(1);
    return s;
}

std::uint64_t parse_u64(const std::string &key, std::string_view v) {
    int base = 10;
    if (v.starts_with("0x") || v.starts_with("0X")) {
        v.remove_prefix(2);
        base = 16;
    }
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out, base);
    if (v.empty() || ec != std::errc{} || p != v.data() + v.size())
        throw ConfigError(key, "expected a non-negative integer, got '" + std::string(v) + "'");
    return out;
}

unsigned parse_uint(const std::string &key, std::string_view v) {
    const std::uint64_t x = parse_u64(key, v);
    if (x > 0xffffffffu)
        throw ConfigError(key, "value out of range");
    return static_cast<unsigned>(x);
}

double parse_double(const std::string &key, std::string_view v) {
    double out = 0.0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc{} || p != v.data() + v.size() || !std::isfinite(out))
        throw ConfigError(key, "expected a finite number, got '" + std::string(v) + "'");
    return out;
}

bool parse_bool(const std::string &key, std::string_view v) {
    if (v == "true" || v == "yes" || v == "on" || v == "1")
        return true;
    if (v == "false" || v == "no" || v == "off" || v == "0")
        return false;
    throw ConfigError(key, "expected true or false, got '" + std::string(v) + "'");
}

std::string fmt_double(double x) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
    (void)ec;
    return {buf, p};
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

std::string_view alignment_name(Alignment a) {
    switch (a) {
    case Alignment::None: return "none";
    case Alignment::Aligned: return "aligned";
    case Alignment::Random: return "random";
    }
    return "?";
}

std::string_view expectation_name(Expectation e) {
    switch (e) {
    case Expectation::Auto: return "auto";
    case Expectation::Yes: return "yes";
    case Expectation::No: return "no";
    }
    return "?";
}

using Setter = std::function<void(ScenarioConfig &, const std::string &, std::string_view)>;

const std::map<std::string, Setter, std::less<>> &setters() {
    static const std::map<std::string, Setter, std::less<>> table = {
        {"name", [](auto &c, auto &, auto v) { c.name = std::string(v); }},
        {"length", [](auto &c, auto &k, auto v) { c.length = parse_uint(k, v); }},
        {"opcode_width", [](auto &c, auto &k, auto v) { c.trigger.opcode_width = parse_uint(k, v); }},
        {"alpha", [](auto &c, auto &k, auto v) { c.trigger.alpha = parse_uint(k, v); }},
        {"beta", [](auto &c, auto &k, auto v) { c.trigger.beta = parse_uint(k, v); }},
        {"gamma", [](auto &c, auto &k, auto v) { c.trigger.gamma = parse_uint(k, v); }},
        {"delta", [](auto &c, auto &k, auto v) { c.trigger.delta = parse_uint(k, v); }},
        {"alphabet", [](auto &c, auto &k, auto v) { c.alphabet = parse_uint(k, v); }},
        {"cycles", [](auto &c, auto &k, auto v) { c.cycles = parse_u64(k, v); }},
        {"seed", [](auto &c, auto &k, auto v) { c.seed = parse_u64(k, v); }},
        {"alignment",
         [](auto &c, auto &k, auto v) {
             if (v == "none")
                 c.alignment = Alignment::None;
             else if (v == "aligned")
                 c.alignment = Alignment::Aligned;
             else if (v == "random")
                 c.alignment = Alignment::Random;
             else
                 throw ConfigError(k, "expected none, aligned or random");
         }},
        {"attempts", [](auto &c, auto &k, auto v) { c.attempts = parse_uint(k, v); }},
        {"alignment_seed", [](auto &c, auto &k, auto v) { c.alignment_seed = parse_u64(k, v); }},
        {"trigger_at", [](auto &c, auto &k, auto v) { c.trigger_at = parse_u64(k, v); }},
        {"expect_activation",
         [](auto &c, auto &k, auto v) {
             if (v == "auto")
                 c.expect_activation = Expectation::Auto;
             else if (v == "yes")
                 c.expect_activation = Expectation::Yes;
             else if (v == "no")
                 c.expect_activation = Expectation::No;
             else
                 throw ConfigError(k, "expected auto, yes or no");
         }},
        {"conceal_trigger", [](auto &c, auto &k, auto v) { c.conceal_trigger = parse_bool(k, v); }},
        {"payload",
         [](auto &c, auto &k, auto v) {
             if (v == "none") {
                 c.payload.reset();
                 return;
             }
             try {
                 c.payload = trojan::parse_payload_mode(v);
             } catch (const trojan::TrojanError &) {
                 throw ConfigError(k, "expected none, concealed, mode1 or mode2");
             }
         }},
        {"secret", [](auto &c, auto &, auto v) { c.secret = std::string(v); }},
        {"jammer_pairs", [](auto &c, auto &k, auto v) { c.jammer_pairs = parse_uint(k, v); }},
        {"jammer_seed", [](auto &c, auto &k, auto v) { c.jammer_seed = parse_u64(k, v); }},
        {"jammer_trials", [](auto &c, auto &k, auto v) { c.jammer_trials = parse_uint(k, v); }},
        {"threshold",
         [](auto &c, auto &k, auto v) {
             if (v == "auto")
                 c.threshold.reset();
             else
                 c.threshold = parse_double(k, v);
         }},
        {"uci_window",
         [](auto &c, auto &k, auto v) {
             if (v == "auto") {
                 c.uci_window.reset();
                 return;
             }
             const auto colon = v.find(':');
             if (colon == std::string_view::npos)
                 throw ConfigError(k, "expected auto or <begin>:<end>");
             c.uci_window = Window{parse_u64(k, trim(v.substr(0, colon))),
                                   parse_u64(k, trim(v.substr(colon + 1)))};
         }},
        {"spectrum_window",
         [](auto &c, auto &k, auto v) { c.spectrum_window = v == "auto" ? 0 : parse_u64(k, v); }},
        {"peak_ratio", [](auto &c, auto &k, auto v) { c.peak_ratio = parse_double(k, v); }},
        {"max_accuracy", [](auto &c, auto &k, auto v) { c.max_accuracy = parse_double(k, v); }},
        {"weight_lut", [](auto &c, auto &k, auto v) { c.weights.lut = parse_double(k, v); }},
        {"weight_ff", [](auto &c, auto &k, auto v) { c.weights.ff = parse_double(k, v); }},
        {"weight_port", [](auto &c, auto &k, auto v) { c.weights.port = parse_double(k, v); }},
        {"weight_constant", [](auto &c, auto &k, auto v) { c.weights.constant = parse_double(k, v); }},
        {"out", [](auto &c, auto &, auto v) { c.out = std::string(v); }},
        {"export_trace", [](auto &c, auto &k, auto v) { c.export_trace = parse_bool(k, v); }},
        {"export_netlist", [](auto &c, auto &k, auto v) { c.export_netlist = parse_bool(k, v); }},
        {"netlist", [](auto &c, auto &, auto v) { c.netlist_in = std::string(v); }},
        {"trace", [](auto &c, auto &, auto v) { c.trace_in = std::string(v); }},
    };
    return table;
}

} // namespace

bool ScenarioConfig::operator==(const ScenarioConfig &o) const {
    auto window_eq = [](const std::optional<Window> &a, const std::optional<Window> &b) {
        return a.has_value() == b.has_value() && (!a || (a->begin == b->begin && a->end == b->end));
    };
    auto spec = [](const trojan::TriggerSpec &s) {
        return std::tuple(s.alpha, s.beta, s.gamma, s.delta, s.opcode_width);
    };
    auto w = [](const sca::PowerWeights &x) { return std::tuple(x.lut, x.ff, x.port, x.constant); };
    return name == o.name && length == o.length && spec(trigger) == spec(o.trigger) &&
           alphabet == o.alphabet && cycles == o.cycles && seed == o.seed &&
           alignment == o.alignment && attempts == o.attempts && alignment_seed == o.alignment_seed && trigger_at == o.trigger_at &&
           expect_activation == o.expect_activation && conceal_trigger == o.conceal_trigger &&
           payload == o.payload && secret == o.secret && jammer_pairs == o.jammer_pairs &&
           jammer_seed == o.jammer_seed && jammer_trials == o.jammer_trials &&
           threshold == o.threshold && window_eq(uci_window, o.uci_window) &&
           spectrum_window == o.spectrum_window && peak_ratio == o.peak_ratio &&
           max_accuracy == o.max_accuracy && w(weights) == w(o.weights) && out == o.out &&
           export_trace == o.export_trace && export_netlist == o.export_netlist &&
           netlist_in == o.netlist_in && trace_in == o.trace_in;
}

ScenarioConfig parse_config(std::string_view text) {
    ScenarioConfig cfg;
    std::set<std::string, std::less<>> seen;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty() || (line.front() == '[' && line.back() == ']'))
            continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("", "line " + std::to_string(line_no) + ": expected key = value");
        const std::string key(trim(line.substr(0, eq)));
        const std::string_view value = trim(line.substr(eq + 1));
        const auto it = setters().find(key);
        if (it == setters().end())
            throw ConfigError(key, "unknown key (line " + std::to_string(line_no) + ")");
        if (!seen.insert(key).second)
            throw ConfigError(key, "duplicate key (line " + std::to_string(line_no) + ")");
        it->second(cfg, key, value);
    }
    return cfg;
}

std::string serialize_config(const ScenarioConfig &c) {
    std::ostringstream os;
    auto kv = [&os](std::string_view k, const auto &v) { os << k << " = " << v << '\n'; };
    kv("name", c.name);
    kv("length", c.length);
    kv("opcode_width", c.trigger.opcode_width);
    kv("alpha", c.trigger.alpha);
    kv("beta", c.trigger.beta);
    kv("gamma", c.trigger.gamma);
    kv("delta", c.trigger.delta);
    kv("alphabet", c.alphabet);
    kv("cycles", c.cycles);
    kv("seed", c.seed);
    kv("alignment", alignment_name(c.alignment));
    kv("attempts", c.attempts);
    if (c.alignment_seed)
        kv("alignment_seed", *c.alignment_seed);
    kv("trigger_at", c.trigger_at);
    kv("expect_activation", expectation_name(c.expect_activation));
    kv("conceal_trigger", fmt_bool(c.conceal_trigger));
    kv("payload", c.payload ? trojan::to_string(*c.payload) : std::string_view("none"));
    if (!c.secret.empty())
        kv("secret", c.secret);
    kv("jammer_pairs", c.jammer_pairs);
    if (c.jammer_seed)
        kv("jammer_seed", *c.jammer_seed);
    kv("jammer_trials", c.jammer_trials);
    kv("threshold", c.threshold ? fmt_double(*c.threshold) : std::string("auto"));
    kv("uci_window", c.uci_window ? std::to_string(c.uci_window->begin) + ":" +
                                        std::to_string(c.uci_window->end)
                                  : std::string("auto"));
    kv("spectrum_window", c.spectrum_window ? std::to_string(c.spectrum_window) : std::string("auto"));
    kv("peak_ratio", fmt_double(c.peak_ratio));
    kv("max_accuracy", fmt_double(c.max_accuracy));
    kv("weight_lut", fmt_double(c.weights.lut));
    kv("weight_ff", fmt_double(c.weights.ff));
    kv("weight_port", fmt_double(c.weights.port));
    kv("weight_constant", fmt_double(c.weights.constant));
    kv("out", c.out);
    kv("export_trace", fmt_bool(c.export_trace));
    kv("export_netlist", fmt_bool(c.export_netlist));
    if (!c.netlist_in.empty())
        kv("netlist", c.netlist_in);
    if (!c.trace_in.empty())
        kv("trace", c.trace_in);
    return os.str();
}

ScenarioConfig load_config(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("", "cannot read config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

void validate(const ScenarioConfig &c) {
    if (c.name.empty())
        throw ConfigError("name", "must not be empty");
    try {
        fm::check_length(c.length);
    } catch (const fm::FmError &e) {
        throw ConfigError("length", e.what());
    }
    try {
        c.trigger.validate();
    } catch (const trojan::TrojanError &e) {
        throw ConfigError("alpha..delta/opcode_width", e.what());
    }
    if (c.alphabet < 1 || c.alphabet > (1u << c.trigger.opcode_width))
        throw ConfigError("alphabet", "must be in [1, 2^opcode_width]");
    if (c.cycles < 4 * std::size_t{c.length} || c.cycles > 10'000'000)
        throw ConfigError("cycles", "must be in [4*length, 10^7]");
    if (c.attempts < 1)
        throw ConfigError("attempts", "must be at least 1");
    if (c.alignment == Alignment::Random &&
        std::size_t{c.attempts} * 2 * c.length + 4 > c.cycles - 1)
        throw ConfigError("attempts", "random-retry slots do not fit in the simulated cycles");
    if (c.alignment == Alignment::Aligned && (c.trigger_at < 4 || c.trigger_at + c.length >= c.cycles))
        throw ConfigError("trigger_at", "must be in [4, cycles - length)");
    if (c.payload) {
        if (c.secret.empty())
            throw ConfigError("secret", "a payload needs a secret");
        resolve_secret(c);
    } else if (!c.secret.empty()) {
        throw ConfigError("secret", "given without a payload");
    }
    if (c.jammer_pairs > 0 &&
        (!c.payload || *c.payload == trojan::PayloadMode::Concealed))
        throw ConfigError("jammer_pairs", "jamming needs payload mode1 or mode2");
    if (c.jammer_pairs > 64)
        throw ConfigError("jammer_pairs", "at most 64");
    if (c.jammer_trials < 1 || c.jammer_trials > 256)
        throw ConfigError("jammer_trials", "must be in [1, 256]");
    if (c.uci_window && (c.uci_window->empty() || c.uci_window->end > c.cycles))
        throw ConfigError("uci_window", "must be a non-empty range inside the simulated cycles");
    if (c.spectrum_window != 0 &&
        (c.spectrum_window < 2 || !std::has_single_bit(c.spectrum_window) ||
         c.spectrum_window > c.cycles))
        throw ConfigError("spectrum_window", "must be auto or a power of two <= cycles");
    if (!(c.peak_ratio > 0.0 && c.peak_ratio <= 1.0))
        throw ConfigError("peak_ratio", "must be in (0, 1]");
    if (!(c.max_accuracy >= 0.0 && c.max_accuracy <= 1.0))
        throw ConfigError("max_accuracy", "must be in [0, 1]");
    for (auto [key, w] : {std::pair{"weight_lut", c.weights.lut}, {"weight_ff", c.weights.ff},
                          {"weight_port", c.weights.port}, {"weight_constant", c.weights.constant}})
        if (!(w >= 0.0))
            throw ConfigError(key, "must be non-negative");
    if (c.out.empty())
        throw ConfigError("out", "must not be empty");
}

std::vector<std::uint8_t> resolve_secret(const ScenarioConfig &c) {
    std::string_view s = c.secret;
    if (s.starts_with("random:")) {
        const std::size_t n = parse_u64("secret", s.substr(7));
        if (n < 1 || n > 100000)
            throw ConfigError("secret", "random secret length must be in [1, 100000]");
        std::mt19937_64 rng(detail::derive_seed(c.seed, 4));
        std::vector<std::uint8_t> bits(n);
        for (auto &b : bits)
            b = static_cast<std::uint8_t>(detail::uniform_below(rng, 2));
        return bits;
    }
    std::vector<std::uint8_t> bits;
    for (char ch : s) {
        if (ch != '0' && ch != '1')
            throw ConfigError("secret", "expected a 0/1 string or random:<n>");
        bits.push_back(ch == '1');
    }
    return bits;
}

} // namespace fmtrojan::scenario
