#pragma once

#include <openssl/evp.h>

#include <array>
#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace wmkit::cli
{

/// SHA-256 over (file name, NUL, file bytes) for each file in order.
inline std::string digest_files(const std::vector<std::filesystem::path> & files)
{
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 init failed");
  }
  std::array<char, 1 << 14> buf{};
  for (const auto & f : files) {
    const std::string name = f.filename().string();
    EVP_DigestUpdate(ctx.get(), name.data(), name.size() + 1);
    std::ifstream in(f, std::ios::binary);
    while (in.read(buf.data(), buf.size()) || in.gcount() > 0) {
      EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xF];
  }
  return "sha256:" + out;
}

}  // namespace wmkit::cli
