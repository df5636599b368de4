#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "ntpowd/capture.hpp"
#include "ntpowd/io.hpp"
#include "ntpowd/matrix.hpp"
#include "ntpowd/tier.hpp"

namespace {

// exit codes: 0 success, 1 usage/config, 2 data
int classify_exception(const std::exception& e) {
  if (dynamic_cast<const std::invalid_argument*>(&e)) return 1;
  if (dynamic_cast<const ntpowd::InvalidPoll*>(&e)) return 1;
  return 2;
}

void emit_error(bool json_errors, int code, const std::string& message) {
  if (json_errors) {
    nlohmann::json j;
    j["error"]["type"] = code == 1 ? "usage" : "data";
    j["error"]["message"] = message;
    std::fprintf(stderr, "%s\n", j.dump().c_str());
  } else {
    std::fprintf(stderr, "error: %s\n", message.c_str());
  }
}

}  // namespace

int main(int argc, char** argv) {
  bool json_errors = false;
  for (int i = 1; i < argc; ++i)
    if (std::string(argv[i]) == "--json-errors") json_errors = true;

  CLI::App app{"passive NTP one-way-delay extraction, tier labeling, and "
               "latency-matrix completion"};
  app.set_config("--config", "", "INI config file; command-line flags win");
  bool json_flag = false;
  app.add_flag("--json-errors", json_flag, "emit machine-readable errors on stderr");
  app.require_subcommand(1);

  ntpowd::cli::register_simulate(app);
  ntpowd::cli::register_classify(app);
  ntpowd::cli::register_complete(app);
  ntpowd::cli::register_geolocate(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    if (json_errors) {
      emit_error(true, 1, e.what());
      return 1;
    }
    app.exit(e);
    return 1;
  } catch (const std::exception& e) {
    int code = classify_exception(e);
    emit_error(json_errors, code, e.what());
    return code;
  }
  return 0;
}
