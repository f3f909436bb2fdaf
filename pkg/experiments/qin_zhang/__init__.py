# Qin-Zhang simulation experiment
