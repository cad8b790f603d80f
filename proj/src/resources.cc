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

#include "fraggraph/resources.h"

#include <cctype>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace fraggraph {
namespace {

using Span = std::pair<std::size_t, std::size_t>;  // [begin, end)

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alpha(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}
bool is_path_char(char c) {
  return is_alpha(c) || is_digit(c) || c == '.' || c == '_' || c == '-';
}
bool is_label_char(char c) { return is_alpha(c) || is_digit(c) || c == '-'; }
bool is_url_stop(char c) {
  return std::isspace(static_cast<unsigned char>(c)) || c == '"' ||
         c == '\'' || c == '<' || c == '>';
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

void mask(std::string& text, const std::vector<Span>& spans) {
  for (auto [b, e] : spans) {
    for (std::size_t i = b; i < e; ++i) text[i] = ' ';
  }
}

// https?://[^\s"'<>]+
std::vector<Span> find_urls(std::string_view s) {
  std::vector<Span> out;
  std::size_t i = 0;
  while (i < s.size()) {
    std::size_t prefix = 0;
    if (s.compare(i, 7, "http://") == 0) {
      prefix = 7;
    } else if (s.compare(i, 8, "https://") == 0) {
      prefix = 8;
    }
    if (prefix == 0) {
      ++i;
      continue;
    }
    std::size_t j = i + prefix;
    while (j < s.size() && !is_url_stop(s[j])) ++j;
    if (j == i + prefix) {
      ++i;
      continue;
    }
    out.emplace_back(i, j);
    i = j;
  }
  return out;
}

std::string canonical_url(std::string_view url) {
  const std::size_t scheme_end = url.find("://") + 3;
  std::size_t host_end = scheme_end;
  while (host_end < url.size() && url[host_end] != '/' &&
         url[host_end] != '?' && url[host_end] != '#') {
    ++host_end;
  }
  return lower(url.substr(0, host_end)) + std::string(url.substr(host_end));
}

// (/[A-Za-z0-9._-]+){1,}
std::vector<Span> find_paths(std::string_view s) {
  std::vector<Span> out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] != '/' || i + 1 >= s.size() || !is_path_char(s[i + 1])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < s.size() && s[j] == '/' && is_path_char(s[j + 1])) {
      ++j;
      while (j < s.size() && is_path_char(s[j])) ++j;
    }
    out.emplace_back(i, j);
    i = j;
  }
  return out;
}

// Dotted quad, each octet 1-3 digits in 0..255, not embedded in a longer
// run of digits and dots.
std::vector<Span> find_ipv4(std::string_view s) {
  std::vector<Span> out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!is_digit(s[i]) || (i > 0 && (is_digit(s[i - 1]) || s[i - 1] == '.'))) {
      ++i;
      continue;
    }
    // Take the maximal run of digits and dots starting here.
    std::size_t j = i;
    while (j < s.size() && (is_digit(s[j]) || s[j] == '.')) ++j;
    std::string_view run = s.substr(i, j - i);
    // A trailing sentence dot is not part of the address.
    std::size_t end = j;
    if (!run.empty() && run.back() == '.') {
      run.remove_suffix(1);
      --end;
    }
    int octets = 0;
    bool ok = !run.empty();
    std::size_t p = 0;
    while (ok && p <= run.size()) {
      std::size_t q = run.find('.', p);
      if (q == std::string_view::npos) q = run.size();
      std::string_view octet = run.substr(p, q - p);
      if (octet.empty() || octet.size() > 3) {
        ok = false;
        break;
      }
      int value = 0;
      for (char c : octet) value = value * 10 + (c - '0');
      if (value > 255) ok = false;
      ++octets;
      p = q + 1;
    }
    if (ok && octets == 4) out.emplace_back(i, end);
    i = j;
  }
  return out;
}

// [A-Za-z0-9-]+(\.[A-Za-z0-9-]+)+ with an alphabetic final label.
std::vector<Span> find_hosts(std::string_view s) {
  std::vector<Span> out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!is_label_char(s[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && is_label_char(s[j])) ++j;
    std::size_t labels = 1;
    std::size_t last_label = i;
    while (j + 1 < s.size() && s[j] == '.' && is_label_char(s[j + 1])) {
      last_label = j + 1;
      j = j + 1;
      while (j < s.size() && is_label_char(s[j])) ++j;
      ++labels;
    }
    if (labels >= 2) {
      bool alphabetic = true;
      for (std::size_t k = last_label; k < j; ++k) alphabetic &= is_alpha(s[k]);
      if (alphabetic) out.emplace_back(i, j);
    }
    i = j;
  }
  return out;
}

}  // namespace

const char* resource_kind_name(ResourceKind kind) {
  switch (kind) {
    case ResourceKind::Path: return "path";
    case ResourceKind::Url: return "url";
    case ResourceKind::Host: return "host";
    case ResourceKind::Ipv4: return "ipv4";
  }
  return "unknown";
}

std::set<Resource> extract_resources(std::string_view arguments) {
  std::set<Resource> found;
  std::string text(arguments);

  const auto urls = find_urls(text);
  for (auto [b, e] : urls) {
    found.insert({ResourceKind::Url, canonical_url(text.substr(b, e - b))});
  }
  std::string url_masked = text;
  mask(url_masked, urls);

  const auto paths = find_paths(url_masked);
  for (auto [b, e] : paths) {
    found.insert({ResourceKind::Path, url_masked.substr(b, e - b)});
  }
  std::string path_masked = text;
  mask(path_masked, paths);
  for (auto [b, e] : find_ipv4(path_masked)) {
    found.insert({ResourceKind::Ipv4, path_masked.substr(b, e - b)});
  }

  mask(url_masked, paths);
  for (auto [b, e] : find_hosts(url_masked)) {
    found.insert({ResourceKind::Host, lower(url_masked.substr(b, e - b))});
  }
  return found;
}

}  // namespace fraggraph
