#ifndef WVA_ERRORS_HPP
#define WVA_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace wva {

// Invalid or inconsistent run configuration (bad keys, out-of-range values).
// The command-line driver maps this to exit code 2.
class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// Numerically degenerate information quantity (e.g. an outcome probability at
// the guard band with a non-vanishing derivative, or a singular post-selection
// probability). The command-line driver maps this to exit code 3.
class degeneracy_error : public std::runtime_error {
 public:
  explicit degeneracy_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace wva

#endif  // WVA_ERRORS_HPP
