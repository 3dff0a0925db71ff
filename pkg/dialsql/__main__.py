from dialsql.cli import main

main()
