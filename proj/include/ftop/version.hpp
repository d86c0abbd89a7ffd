#pragma once

namespace ftop {

const char* version();

}  // namespace ftop
