#pragma once

// Single include point for the vendored nlohmann/json header so warnings from
// it stay out of our translation units.
#if defined(__GNUC__)
#pragma GCC diagnostic push
#pragma GCC diagnostic ignored "-Wmaybe-uninitialized"
#endif
#include "json.hpp"
#if defined(__GNUC__)
#pragma GCC diagnostic pop
#endif
