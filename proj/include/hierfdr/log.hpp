#pragma once

#include <string_view>

namespace hierfdr::log {

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

// Level is read once from HIERFDR_LOG (error|warn|info|debug), default warn.
Level level();
void set_level(Level lvl);
void write(Level lvl, std::string_view msg);

inline void warn(std::string_view msg) { write(Level::Warn, msg); }
inline void info(std::string_view msg) { write(Level::Info, msg); }
inline void debug(std::string_view msg) { write(Level::Debug, msg); }

}  // namespace hierfdr::log
