/* archived toolbar counter */
