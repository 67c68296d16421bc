#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include <curl/curl.h>
#include <zlib.h>

#include "latinav/corpus.hpp"

namespace fs = std::filesystem;

namespace latinav {

namespace {

std::size_t write_to_stream(char* ptr, std::size_t size, std::size_t nmemb, void* userdata) {
  auto* out = static_cast<std::ofstream*>(userdata);
  out->write(ptr, static_cast<std::streamsize>(size * nmemb));
  return out->good() ? size * nmemb : 0;
}

void download(const std::string& url, const fs::path& target) {
  static const CURLcode init = curl_global_init(CURL_GLOBAL_DEFAULT);
  if (init != CURLE_OK) throw FetchError("libcurl initialisation failed");

  std::unique_ptr<CURL, decltype(&curl_easy_cleanup)> curl(curl_easy_init(), curl_easy_cleanup);
  if (!curl) throw FetchError("libcurl handle creation failed");

  std::ofstream out(target, std::ios::binary | std::ios::trunc);
  if (!out) throw FetchError("cannot write " + target.string());

  char errbuf[CURL_ERROR_SIZE] = {0};
  curl_easy_setopt(curl.get(), CURLOPT_URL, url.c_str());
  curl_easy_setopt(curl.get(), CURLOPT_FOLLOWLOCATION, 1L);
  curl_easy_setopt(curl.get(), CURLOPT_FAILONERROR, 1L);
  curl_easy_setopt(curl.get(), CURLOPT_CONNECTTIMEOUT, 30L);
  curl_easy_setopt(curl.get(), CURLOPT_ERRORBUFFER, errbuf);
  curl_easy_setopt(curl.get(), CURLOPT_WRITEFUNCTION, write_to_stream);
  curl_easy_setopt(curl.get(), CURLOPT_WRITEDATA, &out);
  const CURLcode rc = curl_easy_perform(curl.get());
  out.close();
  if (rc != CURLE_OK) {
    std::error_code ec;
    fs::remove(target, ec);
    throw FetchError("download of " + url + " failed: " +
                     (errbuf[0] ? std::string(errbuf) : curl_easy_strerror(rc)));
  }
}

}  // namespace

fs::path fetch_dataset(const std::string& url, const std::string& expected_checksum,
                       const fs::path& dest) {
  if (fs::exists(dest)) {
    if (expected_checksum.empty()) return dest;
    const std::string actual = sha256_file(dest);
    if (actual == expected_checksum) return dest;
    // A stale or corrupted cache is only replaced when we can download again.
    if (url.empty()) throw ChecksumMismatch(expected_checksum, actual);
  }
  if (url.empty()) throw FetchError("no URL configured and no cached archive at " + dest.string());

  if (dest.has_parent_path()) fs::create_directories(dest.parent_path());
  const fs::path partial = dest.string() + ".part";
  download(url, partial);

  const std::string actual = sha256_file(partial);
  if (!expected_checksum.empty() && actual != expected_checksum) {
    std::error_code ec;
    fs::remove(partial, ec);
    throw ChecksumMismatch(expected_checksum, actual);
  }
  fs::rename(partial, dest);
  return dest;
}

// ---------------------------------------------------------------------------
// Zip extraction

namespace {

std::uint16_t le16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }
std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::string inflate_raw(const unsigned char* data, std::size_t size, std::size_t expected) {
  std::string out(expected, '\0');
  z_stream zs{};
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) throw FetchError("zlib initialisation failed");
  zs.next_in = const_cast<Bytef*>(data);
  zs.avail_in = static_cast<uInt>(size);
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&zs, Z_FINISH);
  const auto produced = zs.total_out;
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || produced != expected) throw FetchError("corrupt deflate stream");
  return out;
}

bool escapes(const fs::path& rel) {
  if (rel.is_absolute() || rel.has_root_name()) return true;
  int depth = 0;
  for (const auto& part : rel) {
    if (part == "..") {
      if (--depth < 0) return true;
    } else if (part != "." && !part.empty()) {
      ++depth;
    }
  }
  return false;
}

}  // namespace

std::vector<fs::path> extract_zip(const fs::path& archive, const fs::path& dest_dir) {
  std::ifstream in(archive, std::ios::binary);
  if (!in) throw FetchError("cannot read " + archive.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  const std::size_t n = bytes.size();
  if (n < 22) throw FetchError(archive.string() + ": not a zip archive");

  // End of central directory record: scan backwards over a possible comment.
  std::size_t eocd = std::string::npos;
  for (std::size_t i = n - 22 + 1; i-- > 0 && n - i <= 22 + 0xFFFF;) {
    if (le32(&bytes[i]) == 0x06054b50) {
      eocd = i;
      break;
    }
  }
  if (eocd == std::string::npos) throw FetchError(archive.string() + ": no central directory");

  const std::size_t entries = le16(&bytes[eocd + 10]);
  std::size_t p = le32(&bytes[eocd + 16]);
  std::vector<fs::path> extracted;
  for (std::size_t e = 0; e < entries; ++e) {
    if (p + 46 > n || le32(&bytes[p]) != 0x02014b50) throw FetchError("corrupt central directory");
    const std::uint16_t method = le16(&bytes[p + 10]);
    const std::uint32_t crc_expected = le32(&bytes[p + 16]);
    const std::uint32_t csize = le32(&bytes[p + 20]);
    const std::uint32_t usize = le32(&bytes[p + 24]);
    const std::uint16_t name_len = le16(&bytes[p + 28]);
    const std::uint16_t extra_len = le16(&bytes[p + 30]);
    const std::uint16_t comment_len = le16(&bytes[p + 32]);
    const std::uint32_t local = le32(&bytes[p + 42]);
    if (p + 46 + name_len > n) throw FetchError("corrupt central directory");
    const std::string name(reinterpret_cast<const char*>(&bytes[p + 46]), name_len);
    p += 46 + name_len + extra_len + comment_len;

    const fs::path rel = fs::path(name).lexically_normal();
    if (escapes(rel)) throw FetchError("zip entry escapes destination: " + name);
    const fs::path target = dest_dir / rel;
    if (name.ends_with('/')) {
      fs::create_directories(target);
      continue;
    }

    if (local + 30 > n || le32(&bytes[local]) != 0x04034b50) throw FetchError("corrupt local header");
    const std::size_t data = local + 30 + le16(&bytes[local + 26]) + le16(&bytes[local + 28]);
    if (data + csize > n) throw FetchError("truncated zip entry: " + name);

    std::string content;
    if (method == 0) {
      content.assign(reinterpret_cast<const char*>(&bytes[data]), csize);
    } else if (method == 8) {
      content = inflate_raw(&bytes[data], csize, usize);
    } else {
      throw FetchError("unsupported zip compression method " + std::to_string(method));
    }
    const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(content.data()),
                           static_cast<uInt>(content.size()));
    if (crc != crc_expected) {
      throw FetchError("CRC mismatch in zip entry: " + name);
    }

    fs::create_directories(target.parent_path());
    std::ofstream out(target, std::ios::binary | std::ios::trunc);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw FetchError("cannot write " + target.string());
    extracted.push_back(target);
  }
  return extracted;
}

}  // namespace latinav
