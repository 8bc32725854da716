#include "tcbinom/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>
#include <utility>

#include <CLI11.hpp>
#include <json.hpp>

#include "tcbinom/parallel.hpp"
#include "tcbinom/seq.hpp"

namespace tcbinom::cli {

using nlohmann::json;

namespace {

const std::map<std::string, Mode> kModes{{"costs", Mode::Costs}, {"frictionless", Mode::Frictionless}};
const std::map<std::string, OutputFormat> kOutputs{{"json", OutputFormat::Json}, {"csv", OutputFormat::Csv}};
const std::map<std::string, PayoffKind> kPayoffs{{"put", PayoffKind::PutPhysical},
                                                 {"call", PayoffKind::CallPhysical},
                                                 {"bullspread", PayoffKind::BullSpreadCash},
                                                 {"custom", PayoffKind::CustomCash}};

const std::vector<int> kDefaultScheduleSteps{1200, 1350, 1500};
const std::vector<int> kDefaultThreadsList{2, 4, 8};
constexpr int kScheduleBlockLevels = 5;
constexpr double kMaxScheduleError = 0.01;

unsigned hardware_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

std::string fixed(double x, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, x);
    return buf;
}

template <class T>
T lookup(const std::map<std::string, T>& table, const std::string& name, const char* what) {
    const auto it = table.find(name);
    if (it == table.end()) throw ConfigError(std::string("unknown ") + what + " '" + name + "'");
    return it->second;
}

// JSON field readers with type checks.
double read_double(const json& j, const char* key) {
    if (!j.is_number()) throw ConfigError(std::string("'") + key + "' must be a number");
    return j.get<double>();
}

int read_int(const json& j, const char* key) {
    if (!j.is_number_integer()) throw ConfigError(std::string("'") + key + "' must be an integer");
    return j.get<int>();
}

std::string read_string(const json& j, const char* key) {
    if (!j.is_string()) throw ConfigError(std::string("'") + key + "' must be a string");
    return j.get<std::string>();
}

template <class T, class Read>
std::vector<T> read_list(const json& j, const char* key, Read read) {
    if (!j.is_array() || j.empty()) throw ConfigError(std::string("'") + key + "' must be a nonempty array");
    std::vector<T> out;
    for (const auto& item : j) out.push_back(read(item, key));
    return out;
}

PwlFunction read_custom_payoff(const json& j) {
    if (!j.is_object()) throw ConfigError("'custom_payoff' must be an object");
    PwlPieces raw;
    for (const auto& [key, value] : j.items()) {
        if (key == "anchor_y") raw.anchor_y = read_double(value, "custom_payoff.anchor_y");
        else if (key == "anchor_value") raw.anchor_value = read_double(value, "custom_payoff.anchor_value");
        else if (key == "breakpoints") {
            if (!value.is_array()) throw ConfigError("'custom_payoff.breakpoints' must be an array");
            raw.breakpoints.clear();
            for (const auto& x : value) raw.breakpoints.push_back(read_double(x, "custom_payoff.breakpoints"));
        } else if (key == "slopes") {
            raw.slopes = read_list<double>(value, "custom_payoff.slopes", read_double);
        } else {
            throw ConfigError("unknown key 'custom_payoff." + key + "'");
        }
    }
    try {
        return canonicalize(raw);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("custom_payoff: ") + e.what());
    }
}

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    }
};

double median(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

// Ask and bid; in frictionless mode both carry the single price.
PriceQuote price_once(const RunConfig& cfg, const ModelParams& m, int threads) {
    const PayoffSpec spec = cfg.payoff_spec();
    const int L = cfg.effective_block_levels();
    if (cfg.mode == Mode::Costs) return price_with_costs_parallel(m, spec, threads, L);
    const double v = frictionless_price_parallel(m, spec, threads, L);
    return {v, v};
}

PriceQuote price_serial(const RunConfig& cfg, const ModelParams& m) {
    const PayoffSpec spec = cfg.payoff_spec();
    if (cfg.mode == Mode::Costs) return price_with_costs(m, spec);
    const double v = frictionless_price(m, spec);
    return {v, v};
}

void write_csv_row(std::ostream& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
}

}  // namespace

std::string to_string(Mode m) { return m == Mode::Costs ? "costs" : "frictionless"; }
std::string to_string(OutputFormat f) { return f == OutputFormat::Json ? "json" : "csv"; }

std::string format_number(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

int RunConfig::effective_threads() const {
    return threads > 0 ? threads : static_cast<int>(hardware_threads());
}

int RunConfig::effective_block_levels() const {
    if (block_levels > 0) return block_levels;
    return mode == Mode::Costs ? 5 : 50;
}

PayoffSpec RunConfig::payoff_spec() const {
    switch (payoff) {
        case PayoffKind::PutPhysical: return PayoffSpec::put(strike);
        case PayoffKind::CallPhysical: return PayoffSpec::call(strike);
        case PayoffKind::BullSpreadCash: return PayoffSpec::bull_spread(strike, strike2);
        case PayoffKind::CustomCash:
            if (!custom_payoff) throw ConfigError("payoff 'custom' needs a 'custom_payoff' entry in the config file");
            return PayoffSpec::custom(*custom_payoff);
    }
    throw ConfigError("unknown payoff");
}

ModelParams RunConfig::model() const { return model(spot, cost_rate, steps); }

ModelParams RunConfig::model(double spot_value, double k, int n) const {
    return calibrate(spot_value, volatility, rate, expiry, n, k);
}

void apply_json(RunConfig& cfg, const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");

    using Setter = std::function<void(const json&)>;
    const std::map<std::string, Setter> setters{
        {"mode", [&](const json& v) { cfg.mode = lookup(kModes, read_string(v, "mode"), "mode"); }},
        {"payoff", [&](const json& v) { cfg.payoff = lookup(kPayoffs, read_string(v, "payoff"), "payoff"); }},
        {"strike", [&](const json& v) { cfg.strike = read_double(v, "strike"); }},
        {"strike2", [&](const json& v) { cfg.strike2 = read_double(v, "strike2"); }},
        {"spot", [&](const json& v) { cfg.spot = read_double(v, "spot"); }},
        {"volatility", [&](const json& v) { cfg.volatility = read_double(v, "volatility"); }},
        {"rate", [&](const json& v) { cfg.rate = read_double(v, "rate"); }},
        {"expiry", [&](const json& v) { cfg.expiry = read_double(v, "expiry"); }},
        {"steps", [&](const json& v) { cfg.steps = read_int(v, "steps"); }},
        {"cost_rate", [&](const json& v) { cfg.cost_rate = read_double(v, "cost_rate"); }},
        {"threads", [&](const json& v) { cfg.threads = read_int(v, "threads"); }},
        {"block_levels", [&](const json& v) { cfg.block_levels = read_int(v, "block_levels"); }},
        {"output", [&](const json& v) { cfg.output = lookup(kOutputs, read_string(v, "output"), "output"); }},
        {"sweep_from", [&](const json& v) { cfg.sweep_from = read_double(v, "sweep_from"); }},
        {"sweep_to", [&](const json& v) { cfg.sweep_to = read_double(v, "sweep_to"); }},
        {"sweep_step", [&](const json& v) { cfg.sweep_step = read_double(v, "sweep_step"); }},
        {"cost_rates", [&](const json& v) { cfg.cost_rates = read_list<double>(v, "cost_rates", read_double); }},
        {"steps_list", [&](const json& v) { cfg.steps_list = read_list<int>(v, "steps_list", read_int); }},
        {"threads_list", [&](const json& v) { cfg.threads_list = read_list<int>(v, "threads_list", read_int); }},
        {"repeats", [&](const json& v) { cfg.repeats = read_int(v, "repeats"); }},
        {"custom_payoff", [&](const json& v) { cfg.custom_payoff = read_custom_payoff(v); }},
    };
    for (const auto& [key, value] : doc.items()) {
        const auto it = setters.find(key);
        if (it == setters.end()) throw ConfigError("unknown config key '" + key + "'");
        it->second(value);
    }
}

void validate(const RunConfig& cfg) {
    auto require = [](bool ok, const std::string& msg) {
        if (!ok) throw ConfigError(msg);
    };
    require(cfg.steps >= 1, "steps must be at least 1");
    require(cfg.threads >= 0, "threads must be at least 1 (or 0 for hardware parallelism)");
    require(cfg.block_levels >= 0, "block levels must be at least 1 (or 0 for the mode default)");
    require(cfg.repeats >= 1, "repeats must be at least 1");
    require(std::isfinite(cfg.sweep_step) && cfg.sweep_step > 0, "sweep step must be positive");
    require(std::isfinite(cfg.sweep_from) && std::isfinite(cfg.sweep_to) && cfg.sweep_from <= cfg.sweep_to,
            "sweep range must satisfy from <= to");
    require(cfg.sweep_from > 0, "sweep must start at a positive spot");
    require(!cfg.cost_rates.empty(), "cost rate list must be nonempty");
    for (int n : cfg.steps_list) require(n >= 1, "every entry of the steps list must be at least 1");
    for (int p : cfg.threads_list) require(p >= 1, "every entry of the threads list must be at least 1");
    try {
        validate(cfg.payoff_spec());
        (void)cfg.model();
        for (double k : cfg.cost_rates) (void)cfg.model(cfg.spot, k, cfg.steps);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

int cmd_price(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    const int p = cfg.effective_threads();
    const int L = cfg.effective_block_levels();
    const Timer timer;
    const PriceQuote q = price_once(cfg, cfg.model(), p);
    const double ms = timer.ms();

    const bool costs = cfg.mode == Mode::Costs;
    if (cfg.output == OutputFormat::Json) {
        json j{{"mode", to_string(cfg.mode)},
               {"payoff", std::string(to_string(cfg.payoff))},
               {"steps", cfg.steps},
               {"threads", p},
               {"block_levels", L}};
        if (costs) {
            j["ask"] = q.ask;
            j["bid"] = q.bid;
        } else {
            j["price"] = q.ask;
        }
        out << j.dump() << '\n';
    } else {
        write_csv_row(out, costs ? std::vector<std::string>{"mode", "payoff", "N", "p", "L", "ask", "bid"}
                                 : std::vector<std::string>{"mode", "payoff", "N", "p", "L", "price"});
        std::vector<std::string> row{to_string(cfg.mode), std::string(to_string(cfg.payoff)),
                                     std::to_string(cfg.steps), std::to_string(p), std::to_string(L),
                                     format_number(q.ask)};
        if (costs) row.push_back(format_number(q.bid));
        write_csv_row(out, row);
    }
    err << "wall_ms " << fixed(ms, 3) << '\n';
    return kExitOk;
}

int cmd_curve(const RunConfig& cfg, std::ostream& out, std::ostream&) {
    const int p = cfg.effective_threads();
    const auto count = static_cast<int>(std::floor((cfg.sweep_to - cfg.sweep_from) / cfg.sweep_step + 1e-9)) + 1;

    json rows = json::array();
    if (cfg.output == OutputFormat::Csv) write_csv_row(out, {"S0", "k", "ask", "bid"});
    for (int i = 0; i < count; ++i) {
        const double s0 = cfg.sweep_from + i * cfg.sweep_step;
        for (double k : cfg.cost_rates) {
            const PriceQuote q = price_once(cfg, cfg.model(s0, k, cfg.steps), p);
            if (cfg.output == OutputFormat::Csv) {
                write_csv_row(out, {format_number(s0), format_number(k), format_number(q.ask), format_number(q.bid)});
            } else {
                rows.push_back({{"S0", s0}, {"k", k}, {"ask", q.ask}, {"bid", q.bid}});
            }
        }
    }
    if (cfg.output == OutputFormat::Json) out << rows.dump() << '\n';
    return kExitOk;
}

int cmd_verify_scheduler(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    const auto& steps = cfg.steps_list.empty() ? kDefaultScheduleSteps : cfg.steps_list;
    const auto& threads = cfg.threads_list.empty() ? kDefaultThreadsList : cfg.threads_list;
    const int L = cfg.block_levels > 0 ? cfg.block_levels : kScheduleBlockLevels;

    bool all_ok = true;
    json rows = json::array();
    if (cfg.output == OutputFormat::Csv) write_csv_row(out, {"N", "p", "L", "actual", "estimate", "error_pct", "audit"});
    for (int n : steps) {
        for (int p : threads) {
            const long long actual = count_p0_nodes(n, p, L);
            const double estimate = estimate_p0_nodes(n, p);
            const double error = (estimate - static_cast<double>(actual)) / static_cast<double>(actual);
            const ScheduleAudit audit = verify_schedule(n + 1, p, L);
            // a single worker processes the whole tree, so only the audit applies
            const bool within = p == 1 || std::abs(error) <= kMaxScheduleError;
            if (!audit.ok) err << "audit failed for N=" << n << " p=" << p << ": " << audit.failure << '\n';
            if (!within) err << "estimate off by more than 1% for N=" << n << " p=" << p << '\n';
            all_ok = all_ok && audit.ok && within;
            if (cfg.output == OutputFormat::Csv) {
                write_csv_row(out, {std::to_string(n), std::to_string(p), std::to_string(L), std::to_string(actual),
                                    format_number(estimate), fixed(100.0 * error, 2), audit.ok ? "ok" : "fail"});
            } else {
                rows.push_back({{"N", n},
                                {"p", p},
                                {"L", L},
                                {"actual", actual},
                                {"estimate", estimate},
                                {"error_pct", std::round(10000.0 * error) / 100.0},
                                {"audit", audit.ok}});
            }
        }
    }
    if (cfg.output == OutputFormat::Json) out << rows.dump() << '\n';
    return all_ok ? kExitOk : kExitVerifyFailed;
}

int cmd_bench(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    const std::vector<int> steps = cfg.steps_list.empty() ? std::vector<int>{cfg.steps} : cfg.steps_list;
    const auto& threads = cfg.threads_list.empty() ? kDefaultThreadsList : cfg.threads_list;
    const int L = cfg.effective_block_levels();
    const unsigned hw = hardware_threads();
    for (int p : threads) {
        if (static_cast<unsigned>(p) > hw) {
            err << "warning: " << p << " threads requested but only " << hw
                << " hardware threads are available; timings will not reflect parallel speedup\n";
        }
    }

    bool consistent = true;
    std::vector<BenchRecord> records;
    for (int n : steps) {
        const ModelParams m = cfg.model(cfg.spot, cfg.cost_rate, n);
        std::vector<double> times;
        PriceQuote reference{};
        for (int r = 0; r < cfg.repeats; ++r) {
            const Timer t;
            reference = price_serial(cfg, m);
            times.push_back(t.ms());
        }
        const double serial_ms = median(times);
        records.push_back({cfg.mode, n, 1, L, serial_ms, 1.0, 1.0});

        for (int p : threads) {
            if (p == 1) continue;  // the serial baseline is the p = 1 row
            times.clear();
            for (int r = 0; r < cfg.repeats; ++r) {
                const Timer t;
                const PriceQuote q = price_once(cfg, m, p);
                times.push_back(t.ms());
                if (q.ask != reference.ask || q.bid != reference.bid) consistent = false;
            }
            const double ms = median(times);
            const double speedup = serial_ms / ms;
            records.push_back({cfg.mode, n, p, L, ms, speedup, speedup / p});
        }
    }

    if (cfg.output == OutputFormat::Csv) {
        write_csv_row(out, {"mode", "N", "p", "L", "wall_ms", "speedup", "efficiency"});
        for (const auto& r : records) {
            write_csv_row(out, {to_string(r.mode), std::to_string(r.steps), std::to_string(r.threads),
                                std::to_string(r.block_levels), fixed(r.wall_ms, 3), fixed(r.speedup, 3),
                                fixed(r.efficiency, 3)});
        }
    } else {
        json rows = json::array();
        for (const auto& r : records) {
            rows.push_back({{"mode", to_string(r.mode)},
                            {"N", r.steps},
                            {"p", r.threads},
                            {"L", r.block_levels},
                            {"wall_ms", r.wall_ms},
                            {"speedup", r.speedup},
                            {"efficiency", r.efficiency}});
        }
        out << rows.dump() << '\n';
    }
    if (!consistent) {
        err << "parallel result differs from the serial baseline\n";
        return kExitVerifyFailed;
    }
    return kExitOk;
}

namespace {

// Flags are parsed into a staging config; only flags actually given are
// copied over the defaults and the config file.
struct FlagBinder {
    CLI::App& app;
    RunConfig staged;
    std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> copies;

    template <class T>
    CLI::Option* add(const std::string& name, T RunConfig::*field, const std::string& help) {
        CLI::Option* opt = app.add_option(name, staged.*field, help);
        copies.emplace_back(opt, [this, field](RunConfig& dst) { dst.*field = staged.*field; });
        return opt;
    }

    void apply(RunConfig& dst) const {
        for (const auto& [opt, copy] : copies) {
            if (opt->count() > 0) copy(dst);
        }
    }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"American option pricing on binomial lattices with proportional transaction costs"};
    app.require_subcommand(1);

    FlagBinder flags{app, {}, {}};
    flags.add("--mode", &RunConfig::mode, "costs or frictionless")
        ->transform(CLI::CheckedTransformer(kModes, CLI::ignore_case));
    std::string payoff_name;
    CLI::Option* payoff_flag = app.add_option("--payoff", payoff_name, "put, call, bullspread or custom")
                                   ->check(CLI::IsMember(kPayoffs, CLI::ignore_case));
    flags.add("--strike", &RunConfig::strike, "strike (lower strike for bullspread)");
    flags.add("--strike2", &RunConfig::strike2, "upper strike for bullspread");
    flags.add("--spot", &RunConfig::spot, "initial stock price S0");
    flags.add("--vol", &RunConfig::volatility, "annual volatility");
    flags.add("--rate", &RunConfig::rate, "continuously compounded interest rate");
    flags.add("--expiry", &RunConfig::expiry, "time to expiry in years");
    flags.add("--steps", &RunConfig::steps, "number of time steps N");
    flags.add("--cost-rate", &RunConfig::cost_rate, "proportional transaction cost rate k");
    flags.add("--threads", &RunConfig::threads, "worker threads (default: hardware parallelism)");
    flags.add("--block-levels", &RunConfig::block_levels, "levels per round L (default 5 costs, 50 frictionless)");
    flags.add("--sweep-from", &RunConfig::sweep_from, "first S0 of the curve");
    flags.add("--sweep-to", &RunConfig::sweep_to, "last S0 of the curve");
    flags.add("--sweep-step", &RunConfig::sweep_step, "S0 increment of the curve");
    flags.add("--cost-rates", &RunConfig::cost_rates, "comma separated k values for the curve")->delimiter(',');
    flags.add("--steps-list", &RunConfig::steps_list, "comma separated N values")->delimiter(',');
    flags.add("--threads-list", &RunConfig::threads_list, "comma separated thread counts")->delimiter(',');
    flags.add("--repeats", &RunConfig::repeats, "benchmark repetitions (median is reported)");
    flags.add("--output", &RunConfig::output, "json or csv")
        ->transform(CLI::CheckedTransformer(kOutputs, CLI::ignore_case));
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file; flags override its values");

    using Command = int (*)(const RunConfig&, std::ostream&, std::ostream&);
    const std::vector<std::tuple<std::string, std::string, Command>> commands{
        {"price", "price one option", cmd_price},
        {"curve", "ask and bid over a range of S0 and cost rates", cmd_curve},
        {"verify-sched", "check the scheduler's worker-0 node counts and dependencies", cmd_verify_scheduler},
        {"bench", "time the serial and parallel engines", cmd_bench},
    };
    std::vector<CLI::App*> subs;
    for (const auto& [name, help, fn] : commands) subs.push_back(app.add_subcommand(name, help)->fallthrough());

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        RunConfig cfg;
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw ConfigError("cannot read config file '" + config_path + "'");
            std::ostringstream text;
            text << in.rdbuf();
            apply_json(cfg, text.str());
        }
        flags.apply(cfg);
        if (payoff_flag->count() > 0) cfg.payoff = lookup(kPayoffs, payoff_name, "payoff");
        validate(cfg);
        for (std::size_t i = 0; i < subs.size(); ++i) {
            if (subs[i]->parsed()) return std::get<2>(commands[i])(cfg, out, err);
        }
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    }
}

}  // namespace tcbinom::cli
