#include "ftop/version.hpp"

namespace ftop {

const char* version() { return "0.1.0"; }

}  // namespace ftop
