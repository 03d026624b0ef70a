#pragma once

#include <stdexcept>
#include <string>

namespace shelfpipe {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidParamsError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

struct MissingFileError : Error {
  explicit MissingFileError(const std::string& path)
      : Error("missing file: " + path), path(path) {}
  std::string path;
};

struct MalformedLineError : Error {
  MalformedLineError(const std::string& file, int line_no, const std::string& what)
      : Error(file + ":" + std::to_string(line_no) + ": " + what),
        file(file),
        line_no(line_no) {}
  std::string file;
  int line_no;
};

struct DuplicateImageIdError : Error {
  explicit DuplicateImageIdError(const std::string& id)
      : Error("duplicate image id: " + id), id(id) {}
  std::string id;
};

struct UnknownImageIdError : Error {
  explicit UnknownImageIdError(const std::string& id)
      : Error("unknown image id: " + id), id(id) {}
  std::string id;
};

struct DuplicateKeyError : Error {
  using Error::Error;
};

struct MissingBaselineError : Error {
  explicit MissingBaselineError(const std::string& name)
      : Error("baseline not found among reports: " + name) {}
};

struct ExecutorError : Error {
  using Error::Error;
};

struct DecodeError : Error {
  explicit DecodeError(const std::string& image_id, const std::string& what = "decode failed")
      : Error(what + " (image " + image_id + ")"), image_id(image_id) {}
  std::string image_id;
};

struct BrokerError : Error {
  using Error::Error;
};

}  // namespace shelfpipe
