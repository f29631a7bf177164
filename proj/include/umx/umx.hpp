#pragma once

// Umbrella header: the whole library in dependency order.

#include "umx/common.hpp"
#include "umx/crypto.hpp"
#include "umx/encoding.hpp"
#include "umx/credits.hpp"
#include "umx/utility.hpp"
#include "umx/metering.hpp"
#include "umx/currency.hpp"
#include "umx/pricing.hpp"
#include "umx/ledger.hpp"
#include "umx/market.hpp"
#include "umx/serialize.hpp"
#include "umx/node.hpp"
#include "umx/simnet.hpp"
#include "umx/scenario.hpp"
