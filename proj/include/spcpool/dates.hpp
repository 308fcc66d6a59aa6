#pragma once

#include <chrono>
#include <optional>
#include <string>

namespace spcpool {

// Calendar dates are kept as day counts; arithmetic and ordering stay trivial.
using Date = std::chrono::sys_days;

// Parses strict ISO-8601 "YYYY-MM-DD". Rejects impossible calendar dates.
std::optional<Date> parse_date(std::string_view text);

std::string format_date(Date d);

Date make_date(int year, unsigned month, unsigned day);

}  // namespace spcpool
