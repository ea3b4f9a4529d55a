#include "postural/io.hpp"

#include <zlib.h>

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "postural/error.hpp"

namespace postural::io {

std::string gunzip(std::string_view compressed) {
  z_stream zs{};
  // 16 + MAX_WBITS: expect a gzip wrapper
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) {
    throw Error(ErrorCode::IoError, "inflateInit2 failed");
  }
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(compressed.data()));
  zs.avail_in = static_cast<uInt>(compressed.size());
  std::string out;
  char buf[1 << 15];
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = reinterpret_cast<Bytef*>(buf);
    zs.avail_out = sizeof buf;
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw Error(ErrorCode::IoError, "corrupt gzip stream");
    }
    out.append(buf, sizeof buf - zs.avail_out);
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw Error(ErrorCode::IoError, "truncated gzip stream");
    }
  }
  inflateEnd(&zs);
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::NotFound, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string data = std::move(ss).str();
  if (path.extension() == ".gz") return gunzip(data);
  return data;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  const auto tmp = path.string() + ".tmp";
  std::FILE* f = std::fopen(tmp.c_str(), "wb");
  if (f == nullptr) {
    throw Error(ErrorCode::IoError, "cannot create " + tmp + ": " + std::strerror(errno));
  }
  const std::size_t n = std::fwrite(contents.data(), 1, contents.size(), f);
  const int werr = n == contents.size() ? 0 : errno;
  if (std::fflush(f) != 0 || werr != 0) {
    const int err = werr != 0 ? werr : errno;
    std::fclose(f);
    std::remove(tmp.c_str());
    throw Error(err == ENOSPC ? ErrorCode::StorageFull : ErrorCode::IoError,
                "write failed for " + tmp + ": " + std::strerror(err));
  }
  std::fclose(f);
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "rename to " + path.string() + " failed");
}

}  // namespace postural::io
