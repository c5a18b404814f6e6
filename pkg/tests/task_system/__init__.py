"""Task system test package.""" 