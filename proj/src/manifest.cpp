#include "rpl/manifest.hpp"

#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "rpl/error.hpp"

namespace rpl {

std::string git_blob_sha1(const std::string& content) {
  std::string data = "blob " + std::to_string(content.size());
  data.push_back('\0');
  data += content;
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha1(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

std::string file_sha1(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, path.string(), "cannot open");
  std::ostringstream buf;
  buf << in.rdbuf();
  return git_blob_sha1(buf.str());
}

void RunManifest::add_input(const std::filesystem::path& path) { inputs.emplace_back(path.string(), file_sha1(path)); }

nlohmann::json RunManifest::to_json() const {
  nlohmann::json in = nlohmann::json::object();
  for (const auto& [path, hash] : inputs) in[path] = hash;
  return {{"command", command}, {"config", config}, {"seed", seed}, {"input_hashes", in}, {"outputs", outputs}};
}

void RunManifest::write(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, path.string(), "cannot write manifest");
  out << to_json().dump(2) << '\n';
}

}  // namespace rpl
