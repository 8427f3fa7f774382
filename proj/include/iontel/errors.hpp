#pragma once

#include <initializer_list>
#include <stdexcept>
#include <string>
#include <utility>

namespace iontel {

using ErrorContext =
    std::initializer_list<std::pair<const char*, std::string>>;

inline std::string context_join(ErrorContext kv) {
  std::string out;
  for (const auto& [key, value] : kv) {
    if (!out.empty()) out += ", ";
    out += key;
    out += "=";
    out += value;
  }
  return out;
}

// All library failures throw Error. code/module/context stay machine readable
// so the CLI can emit them as a structured JSON object.
class Error : public std::runtime_error {
 public:
  Error(std::string code, std::string module, std::string message,
        std::string context = "")
      : std::runtime_error(module + ": " + message +
                           (context.empty() ? "" : " [" + context + "]")),
        code_(std::move(code)),
        module_(std::move(module)),
        message_(std::move(message)),
        context_(std::move(context)) {}

  const std::string& code() const noexcept { return code_; }
  const std::string& module() const noexcept { return module_; }
  const std::string& message() const noexcept { return message_; }
  const std::string& context() const noexcept { return context_; }

 private:
  std::string code_;
  std::string module_;
  std::string message_;
  std::string context_;
};

inline Error domain_error(std::string module, std::string message,
                          std::string context = "") {
  return Error("domain_error", std::move(module), std::move(message),
               std::move(context));
}

inline Error input_error(std::string module, std::string message,
                         std::string context = "") {
  return Error("input_error", std::move(module), std::move(message),
               std::move(context));
}

inline Error fit_error(std::string module, std::string message,
                       std::string context = "") {
  return Error("fit_error", std::move(module), std::move(message),
               std::move(context));
}

inline Error convergence_error(std::string module, std::string message,
                               std::string context = "") {
  return Error("convergence_error", std::move(module), std::move(message),
               std::move(context));
}

inline Error io_error(std::string module, std::string message,
                      std::string context = "") {
  return Error("io_error", std::move(module), std::move(message),
               std::move(context));
}

inline Error domain_error(std::string module, std::string message,
                          ErrorContext kv) {
  return domain_error(std::move(module), std::move(message), context_join(kv));
}

inline Error input_error(std::string module, std::string message,
                         ErrorContext kv) {
  return input_error(std::move(module), std::move(message), context_join(kv));
}

inline Error fit_error(std::string module, std::string message,
                       ErrorContext kv) {
  return fit_error(std::move(module), std::move(message), context_join(kv));
}

inline Error convergence_error(std::string module, std::string message,
                               ErrorContext kv) {
  return convergence_error(std::move(module), std::move(message),
                           context_join(kv));
}

inline Error io_error(std::string module, std::string message, ErrorContext kv) {
  return io_error(std::move(module), std::move(message), context_join(kv));
}

}  // namespace iontel
