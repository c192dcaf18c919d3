#pragma once

#include "protocols/dct.hpp"
#include "protocols/ndncert.hpp"
#include "protocols/ndnviber.hpp"
#include "protocols/pion.hpp"
#include "protocols/protocol.hpp"
#include "protocols/ssp.hpp"
#include "protocols/testbed.hpp"
