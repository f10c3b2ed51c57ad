namespace pomapf {}
