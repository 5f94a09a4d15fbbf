"""ODMTS network design under congestion with dedicated bus lanes."""
