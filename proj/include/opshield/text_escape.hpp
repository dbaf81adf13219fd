// Copyright 2026 The OpShield Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <string>
#include <string_view>

namespace opshield {

// Whitespace-free encoding of a token for the space separated .vec and
// vocabulary files: '\\' -> "\\\\", ' ' -> "\\s", '\t' -> "\\t",
// '\n' -> "\\n", '\r' -> "\\r". The empty token is written as "\\0".
std::string escape_token(std::string_view token);
std::string unescape_token(std::string_view text);

}  // namespace opshield
