#ifndef SEPVAE_TOOLS_COMMANDS_HPP
#define SEPVAE_TOOLS_COMMANDS_HPP

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace sepvae::cli {

/// Raised for filesystem problems; mapped to exit code 4.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Loads a JSON config file and applies dotted-key overrides
/// ("train.weights.gamma=0.5"). Values parse as JSON when possible,
/// falling back to strings.
nlohmann::ordered_json load_config(const std::string& config_path,
                                   const std::vector<std::string>& overrides);

/// Resolves an output directory against SEPVAE_RUNS_ROOT when relative.
std::string resolve_out_dir(const std::string& out_dir);

void cmd_gen_data(const nlohmann::ordered_json& config, const std::string& out_dir);
void cmd_train(const nlohmann::ordered_json& config, const std::string& data_dir,
               const std::string& out_dir);
void cmd_eval(const std::string& run_dir, const std::string& data_dir);
void cmd_ablate(const nlohmann::ordered_json& config, const std::string& data_dir,
                const std::string& out_dir, const std::vector<uint64_t>& seeds);
void cmd_report(const std::string& run_dir);

}  // namespace sepvae::cli

#endif
