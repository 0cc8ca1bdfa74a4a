#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nfcjam {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error
{
public:
   using std::runtime_error::runtime_error;
};

/// An argument is outside its documented domain (bad cutoff, empty range, ...).
class ParameterError : public Error
{
public:
   using Error::Error;
};

/// Inputs that do not fit together (length mismatch, wrong frame shape, ...).
class StructuralError : public Error
{
public:
   using Error::Error;
};

class IoError : public Error
{
public:
   using Error::Error;
};

class FramingError : public Error
{
public:
   using Error::Error;
};

class ParityError : public Error
{
public:
   ParityError(std::size_t byteIndex)
      : Error("parity error at byte " + std::to_string(byteIndex)), byteIndex(byteIndex)
   {
   }

   std::size_t byteIndex;
};

class CrcError : public Error
{
public:
   using Error::Error;
};

/// No recognizable modulation pattern in the bit period at `position`.
class DemodError : public Error
{
public:
   DemodError(std::size_t position, const std::string &what)
      : Error("demodulation failed at bit " + std::to_string(position) + ": " + what), position(position)
   {
   }

   std::size_t position;
};

class FieldNotFound : public Error
{
public:
   using Error::Error;
};

class SegmentationEmpty : public Error
{
public:
   using Error::Error;
};

}
