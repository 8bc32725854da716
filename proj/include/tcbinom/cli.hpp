#pragma once

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tcbinom/model.hpp"

namespace tcbinom::cli {

enum class Mode { Costs, Frictionless };
enum class OutputFormat { Json, Csv };

std::string to_string(Mode m);
std::string to_string(OutputFormat f);

/// Invalid flags or configuration values. Maps to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitVerifyFailed = 1;
inline constexpr int kExitConfig = 2;

struct RunConfig {
    Mode mode = Mode::Costs;
    PayoffKind payoff = PayoffKind::PutPhysical;
    double strike = 100.0;
    double strike2 = 110.0;
    std::optional<PwlFunction> custom_payoff;
    double spot = 100.0;
    double volatility = 0.2;
    double rate = 0.1;
    double expiry = 0.25;
    int steps = 1000;
    double cost_rate = 0.005;
    int threads = 0;       // 0: hardware parallelism
    int block_levels = 0;  // 0: 5 in costs mode, 50 frictionless
    OutputFormat output = OutputFormat::Csv;
    double sweep_from = 90.0;
    double sweep_to = 110.0;
    double sweep_step = 1.0;
    std::vector<double> cost_rates{0.0, 0.0025, 0.005};
    std::vector<int> steps_list;    // empty: command default
    std::vector<int> threads_list;  // empty: command default
    int repeats = 3;

    int effective_threads() const;
    int effective_block_levels() const;
    PayoffSpec payoff_spec() const;
    ModelParams model() const;  // at spot and cost_rate
    ModelParams model(double spot_value, double k, int n) const;
};

/// Overlays keys from a JSON object (lower_snake_case field names) onto `cfg`.
/// Unknown keys and wrongly typed values raise ConfigError.
void apply_json(RunConfig& cfg, const std::string& json_text);

/// Checks every field the commands rely on; raises ConfigError.
void validate(const RunConfig& cfg);

struct BenchRecord {
    Mode mode;
    int steps;
    int threads;
    int block_levels;
    double wall_ms;
    double speedup;
    double efficiency;
};

int cmd_price(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_curve(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_verify_scheduler(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_bench(const RunConfig& cfg, std::ostream& out, std::ostream& err);

/// Shortest decimal text that reads back to the same double.
std::string format_number(double x);

/// Full command line: `args[0]` is the subcommand. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tcbinom::cli
