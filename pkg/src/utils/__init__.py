# Configuration, logging, image I/O and reports
