#pragma once
#include <CLI11.hpp>

namespace ntpowd::cli {

void register_simulate(CLI::App& app);
void register_classify(CLI::App& app);
void register_complete(CLI::App& app);   // also registers `evaluate`
void register_geolocate(CLI::App& app);

}  // namespace ntpowd::cli
