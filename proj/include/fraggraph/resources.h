/*
 * Copyright 2026 The FragGraph Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FRAGGRAPH_RESOURCES_H_
#define FRAGGRAPH_RESOURCES_H_

#include <compare>
#include <set>
#include <string>
#include <string_view>

namespace fraggraph {

enum class ResourceKind { Path, Url, Host, Ipv4 };

const char* resource_kind_name(ResourceKind kind);

struct Resource {
  ResourceKind kind;
  std::string value;

  auto operator<=>(const Resource&) const = default;
  bool operator==(const Resource&) const = default;
};

// Paths, URLs, hostnames and IPv4 addresses mentioned in an argument string.
//
// URLs are matched first and masked before path and hostname matching, so a
// host or path inside a URL is reported once, as the URL. IPv4 addresses are
// matched with paths masked but URLs visible. URL scheme and host are
// lowercased, hostnames are lowercased, paths are kept verbatim.
std::set<Resource> extract_resources(std::string_view arguments);

}  // namespace fraggraph

#endif  // FRAGGRAPH_RESOURCES_H_
