#ifndef SEPVAE_COMMON_HPP
#define SEPVAE_COMMON_HPP

#include <stdexcept>
#include <string>

namespace sepvae {

// Thrown when a caller violates an operation's precondition.
class ContractViolation : public std::invalid_argument {
public:
    explicit ContractViolation(const std::string& what)
        : std::invalid_argument(what) {}
};

#define SEPVAE_CHECK(cond, msg)                          \
    do {                                                 \
        if (!(cond)) {                                   \
            throw ::sepvae::ContractViolation(           \
                std::string(__func__) + ": " + (msg));   \
        }                                                \
    } while (0)

}  // namespace sepvae

#endif
